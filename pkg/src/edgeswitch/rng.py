"""Seedable random streams, shuffles and switch sources.

Every chain draws its random choices through a :class:`SwitchSource`.  The
default source pulls from a :class:`RandomStream`; a recording source can be
replayed bit-identically through any chain implementation.
"""
from __future__ import annotations

import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit


class RandomStream:
    """A single-owner stream of 64-bit pseudo-random output (PCG64)."""

    def __init__(self, seed: int | None = None, *, _seq: np.random.SeedSequence | None = None):
        if _seq is None:
            if seed is None:
                seed = secrets.randbits(64)
            _seq = np.random.SeedSequence(int(seed))
        self._seq = _seq
        self.seed = int(_seq.entropy) if seed is None else int(seed)
        self.generator = np.random.Generator(np.random.PCG64(_seq))

    def substream(self, *key: int) -> "RandomStream":
        """Independent stream derived from this stream's seed and ``key``."""
        seq = np.random.SeedSequence(self._seq.entropy, spawn_key=self._seq.spawn_key + tuple(key))
        return RandomStream(_seq=seq)

    def fresh_substreams(self, count: int) -> list["RandomStream"]:
        """``count`` new sub-streams; consumes one draw so repeated calls differ."""
        tag = int(self.generator.integers(0, 2**63))
        return [self.substream(tag, i) for i in range(count)]

    def uniform_index(self, bound: int) -> int:
        return uniform_index(self, bound)

    def bits(self, size: int) -> np.ndarray:
        return self.generator.integers(0, 2, size=size, dtype=np.uint8)

    def __repr__(self):
        return f"RandomStream(seed={self.seed})"


def uniform_index(s: RandomStream, bound: int) -> int:
    """Exactly uniform integer in ``[0, bound)``.

    numpy's bounded integers use Lemire's rejection method, so there is no
    modulo bias for any bound.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    return int(s.generator.integers(0, bound, dtype=np.uint64))


def binomial(s: RandomStream, trials: int, success_prob: float) -> int:
    if not 0.0 <= success_prob <= 1.0:
        raise ValueError("success_prob must lie in [0, 1]")
    if trials == 0:
        return 0
    return int(s.generator.binomial(trials, success_prob))


def shuffle(a, s: RandomStream) -> np.ndarray:
    """Uniformly permuted copy of ``a`` (Fisher-Yates)."""
    out = np.array(a, copy=True)
    s.generator.shuffle(out)
    return out


def parallel_shuffle(a, s: RandomStream, P: int, workers: int | None = None) -> np.ndarray:
    """Uniform permutation of ``a`` built from ``P`` independently shuffled buckets.

    Every element is scattered into one of ``P`` buckets by an independent
    uniform draw; each bucket is then shuffled with its own sub-stream and the
    buckets are concatenated.  The result depends only on ``(seed, P)``;
    ``workers`` threads only change how fast it is produced.
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    a = np.asarray(a)
    if P == 1 or a.shape[0] < 2:
        return shuffle(a, s)
    bucket = s.generator.integers(0, P, size=a.shape[0], dtype=np.int64)
    order = np.argsort(bucket, kind="stable")
    out = a[order]
    bounds = np.concatenate([[0], np.cumsum(np.bincount(bucket, minlength=P))])
    streams = s.fresh_substreams(P)

    def work(b):
        streams[b].generator.shuffle(out[bounds[b]:bounds[b + 1]])

    workers = workers or 1
    if workers == 1:
        for b in range(P):
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=min(workers, P)) as ex:
            list(ex.map(work, range(P)))
    return out


def default_shuffle_buckets(m: int) -> int:
    """Bucket count for global-switch permutations; a function of m only."""
    return 1 if m < (1 << 16) else 32


@njit(cache=True)
def _apply_fisher_yates_rows(perms, draws):
    rows, m = perms.shape
    for r in range(rows):
        for t in range(m - 1):
            i = m - 1 - t
            j = draws[r, t]
            tmp = perms[r, i]
            perms[r, i] = perms[r, j]
            perms[r, j] = tmp


def batch_permutations(s: RandomStream, rows: int, m: int) -> np.ndarray:
    """``rows`` independent uniform permutations of ``range(m)``, one per row."""
    perms = np.broadcast_to(np.arange(m, dtype=np.int64), (rows, m)).copy()
    if m > 1:
        highs = np.arange(m, 1, -1, dtype=np.int64)  # draw j in [0, i] for i = m-1 .. 1
        draws = s.generator.integers(0, np.broadcast_to(highs, (rows, m - 1)))
        _apply_fisher_yates_rows(perms, draws)
    return perms


# ---------------------------------------------------------------------------
# switch sources


@dataclass
class GlobalSwitch:
    """A global switch: slot permutation, switch count and direction bits.

    Applying it to an edge array ``E`` first forms ``E[perm]`` and then runs
    switch ``k`` on slots ``(2k, 2k+1)`` with direction ``g[k]``, ``k < ell``.
    """

    perm: np.ndarray
    ell: int
    g: np.ndarray

    def __post_init__(self):
        self.perm = np.asarray(self.perm, dtype=np.int64)
        self.g = np.asarray(self.g, dtype=np.uint8)
        if len(self.g) != self.ell:
            raise ValueError("need exactly ell direction bits")
        if not 0 <= self.ell <= len(self.perm) // 2:
            raise ValueError("ell out of range")


class SwitchSource:
    """Provider of a chain's random choices."""

    def es_switches(self, m: int, count: int):
        """``count`` descriptors ``(i, j, g)`` with ``i != j``, as three arrays."""
        raise NotImplementedError

    def global_switch(self, m: int, p_l: float) -> GlobalSwitch:
        raise NotImplementedError


class RandomSwitchSource(SwitchSource):
    def __init__(self, stream: RandomStream, workers: int = 1):
        self.stream = stream
        self.workers = workers

    def es_switches(self, m, count):
        gen = self.stream.generator
        i = gen.integers(0, m, size=count, dtype=np.int64)
        # uniform over j != i: draw from m-1 values and skip i
        j = gen.integers(0, m - 1, size=count, dtype=np.int64)
        j += j >= i
        g = gen.integers(0, 2, size=count, dtype=np.uint8)
        return i, j, g

    def global_switch(self, m, p_l):
        perm = parallel_shuffle(
            np.arange(m, dtype=np.int64), self.stream, default_shuffle_buckets(m), self.workers
        )
        ell = binomial(self.stream, m // 2, 1.0 - p_l)
        return GlobalSwitch(perm, ell, self.stream.bits(ell))


@dataclass
class RecordingSwitchSource(SwitchSource):
    """Wraps a source and keeps everything it hands out."""

    inner: SwitchSource
    es_log: list = field(default_factory=list)
    global_log: list = field(default_factory=list)

    def es_switches(self, m, count):
        out = self.inner.es_switches(m, count)
        self.es_log.append(tuple(np.copy(x) for x in out))
        return out

    def global_switch(self, m, p_l):
        gs = self.inner.global_switch(m, p_l)
        self.global_log.append(GlobalSwitch(gs.perm.copy(), gs.ell, gs.g.copy()))
        return gs

    def replay(self) -> "ReplaySwitchSource":
        i = np.concatenate([x[0] for x in self.es_log]) if self.es_log else np.empty(0, np.int64)
        j = np.concatenate([x[1] for x in self.es_log]) if self.es_log else np.empty(0, np.int64)
        g = np.concatenate([x[2] for x in self.es_log]) if self.es_log else np.empty(0, np.uint8)
        return ReplaySwitchSource(i, j, g, list(self.global_log))


class ReplaySwitchSource(SwitchSource):
    """Hands out a fixed script of descriptors and global switches, in order."""

    def __init__(self, i=(), j=(), g=(), global_switches=()):
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.g = np.asarray(g, dtype=np.uint8)
        if not len(self.i) == len(self.j) == len(self.g):
            raise ValueError("descriptor arrays differ in length")
        if np.any(self.i == self.j):
            raise ValueError("descriptor with i == j")
        self._pos = 0
        self._global = list(global_switches)
        self._gpos = 0

    def es_switches(self, m, count):
        lo, hi = self._pos, self._pos + count
        if hi > len(self.i):
            raise IndexError("replay script exhausted")
        self._pos = hi
        return self.i[lo:hi], self.j[lo:hi], self.g[lo:hi]

    def global_switch(self, m, p_l):
        if self._gpos >= len(self._global):
            raise IndexError("replay script exhausted")
        gs = self._global[self._gpos]
        self._gpos += 1
        if len(gs.perm) != m:
            raise ValueError("scripted permutation has wrong length")
        return gs
