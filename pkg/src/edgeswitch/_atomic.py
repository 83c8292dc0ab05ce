"""Atomic array primitives for numba kernels.

``cas``, ``load`` and ``store`` lower to LLVM ``cmpxchg`` / atomic load / atomic
store on a single array element, so concurrent ``nogil`` kernels running in
separate Python threads can share arrays safely.
"""
import ctypes

from numba import njit
from numba.core import cgutils
from numba.extending import intrinsic


def _element_pointer(context, builder, arr_t, arr, idx):
    ary = context.make_array(arr_t)(context, builder, arr)
    return cgutils.get_item_pointer(context, builder, arr_t, ary, [idx], wraparound=False)


@intrinsic
def cas(typingctx, arr, idx, expected, new):
    """Compare-and-swap ``arr[idx]``; returns the value observed before the swap."""
    sig = arr.dtype(arr, idx, arr.dtype, arr.dtype)

    def codegen(context, builder, signature, args):
        ptr = _element_pointer(context, builder, signature.args[0], args[0], args[1])
        res = builder.cmpxchg(ptr, args[2], args[3], "seq_cst", "seq_cst")
        return builder.extract_value(res, 0)

    return sig, codegen


@intrinsic
def load(typingctx, arr, idx):
    sig = arr.dtype(arr, idx)

    def codegen(context, builder, signature, args):
        arr_t = signature.args[0]
        ptr = _element_pointer(context, builder, arr_t, args[0], args[1])
        return builder.load_atomic(ptr, "acquire", align=arr_t.dtype.bitwidth // 8)

    return sig, codegen


@intrinsic
def store(typingctx, arr, idx, value):
    from numba.core import types

    sig = types.void(arr, idx, arr.dtype)

    def codegen(context, builder, signature, args):
        arr_t = signature.args[0]
        ptr = _element_pointer(context, builder, arr_t, args[0], args[1])
        builder.store_atomic(args[2], ptr, "release", align=arr_t.dtype.bitwidth // 8)
        return context.get_dummy_value()

    return sig, codegen


_libc = ctypes.CDLL(None)
_sched_yield = _libc.sched_yield
_sched_yield.restype = ctypes.c_int
_sched_yield.argtypes = []


# ctypes pointers cannot be cached
@njit(nogil=True)
def cpu_yield():
    _sched_yield()
