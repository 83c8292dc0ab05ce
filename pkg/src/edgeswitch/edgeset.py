"""Open-addressing hash sets over canonical packed edges.

Two layouts share the hash function and linear probing:

* :class:`SequentialEdgeSet` stores bare 56-bit payloads, deletes by backward
  shifting and grows to keep the load factor at most 1/2.
* :class:`ConcurrentEdgeSet` stores 64-bit cells ``lock:8 | payload:56``.  All
  cell mutations are compare-and-swap operations, so cells never move while
  occupied.  Erased cells become tombstones and are only reclaimed by
  :meth:`ConcurrentEdgeSet.rebuild` at a quiescent point.

The numba kernels are module level so that chain kernels can call them
directly; the classes are thin wrappers for Python callers and tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _atomic
from .errors import Busy, InvariantViolation, StaleTicket
from .graph import MAX_NODES, canonicalize

EMPTY = np.uint64(0)
PAYLOAD_MASK = np.uint64((1 << 56) - 1)
TOMBSTONE = PAYLOAD_MASK
LOCK_SHIFT = np.uint64(56)
MAX_THREADS = 254


@njit(inline="always")
def mix64(x):
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xFF51AFD7ED558CCD)
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xC4CEB93FE53EC4D5)
    x ^= x >> np.uint64(33)
    return x


@njit(cache=True)
def hash_words(words):
    out = np.empty_like(words)
    for i in range(words.shape[0]):
        out[i] = mix64(words[i])
    return out


def next_pow2(x: int) -> int:
    return 1 << max(0, int(x - 1).bit_length())


def table_capacity(m: int) -> int:
    """Buckets for a set built from ``m`` edges: a power of two >= 4m."""
    return max(16, next_pow2(4 * m))


def edge_word(e) -> np.uint64:
    """Canonical payload for an edge given as a pair or an already packed word."""
    if isinstance(e, (tuple, list)):
        u, v = canonicalize(int(e[0]), int(e[1]))
        if u == v:
            raise ValueError("loops cannot be stored")
        if v >= MAX_NODES:
            raise ValueError("node id exceeds 28 bits")
        return np.uint64((u << 28) | v)
    return np.uint64(e)


# ---------------------------------------------------------------------------
# sequential set kernels (buckets hold payloads; 0 means empty)


@njit(inline="always")
def seq_find(buckets, key):
    mask = np.uint64(buckets.shape[0] - 1)
    pos = mix64(key) & mask
    while True:
        cur = buckets[pos]
        if cur == key:
            return np.int64(pos)
        if cur == np.uint64(0):
            return np.int64(-1)
        pos = (pos + np.uint64(1)) & mask


@njit(inline="always")
def seq_insert(buckets, key):
    mask = np.uint64(buckets.shape[0] - 1)
    pos = mix64(key) & mask
    while True:
        cur = buckets[pos]
        if cur == key:
            return False
        if cur == np.uint64(0):
            buckets[pos] = key
            return True
        pos = (pos + np.uint64(1)) & mask


@njit(inline="always")
def seq_erase(buckets, key):
    mask = np.uint64(buckets.shape[0] - 1)
    hole = seq_find(buckets, key)
    if hole < 0:
        return False
    i = np.uint64(hole)
    j = i
    while True:
        j = (j + np.uint64(1)) & mask
        cur = buckets[j]
        if cur == np.uint64(0):
            break
        home = mix64(cur) & mask
        # move cur back into the hole unless its home lies cyclically in (i, j]
        if i <= j:
            stays = i < home and home <= j
        else:
            stays = i < home or home <= j
        if not stays:
            buckets[i] = cur
            i = j
    buckets[i] = np.uint64(0)
    return True


@njit(cache=True)
def _seq_insert_many(buckets, keys):
    added = 0
    for k in range(keys.shape[0]):
        if seq_insert(buckets, keys[k]):
            added += 1
    return added


@njit(cache=True)
def _seq_call(buckets, key, op):
    if op == 0:
        return seq_find(buckets, key) >= 0
    if op == 1:
        return seq_insert(buckets, key)
    return seq_erase(buckets, key)


class SequentialEdgeSet:
    """Single-owner edge set with linear probing and load factor <= 1/2."""

    def __init__(self, capacity: int = 16):
        self.buckets = np.zeros(max(16, next_pow2(capacity)), dtype=np.uint64)
        self.live = 0

    @classmethod
    def from_words(cls, words: np.ndarray, capacity: int | None = None) -> "SequentialEdgeSet":
        words = np.asarray(words, dtype=np.uint64)
        s = cls(capacity or table_capacity(len(words)))
        if 2 * len(words) > len(s.buckets):
            s.buckets = np.zeros(next_pow2(2 * len(words)), dtype=np.uint64)
        s.live = int(_seq_insert_many(s.buckets, words))
        return s

    @property
    def capacity(self) -> int:
        return len(self.buckets)

    def __len__(self):
        return self.live

    def _grow(self):
        old = self.buckets[self.buckets != 0]
        self.buckets = np.zeros(2 * len(self.buckets), dtype=np.uint64)
        _seq_insert_many(self.buckets, old)

    def insert(self, e) -> bool:
        key = edge_word(e)
        if 2 * (self.live + 1) > len(self.buckets):
            self._grow()
        added = bool(_seq_call(self.buckets, key, 1))
        self.live += added
        return added

    def erase(self, e) -> bool:
        key = edge_word(e)
        removed = bool(_seq_call(self.buckets, key, 2))
        self.live -= removed
        return removed

    def contains(self, e) -> bool:
        return bool(_seq_call(self.buckets, edge_word(e), 0))

    __contains__ = contains

    def words(self) -> np.ndarray:
        return np.sort(self.buckets[self.buckets != 0])


# ---------------------------------------------------------------------------
# concurrent set kernels

BUSY = 0
LOCKED_PRESENT = 1
LOCKED_NEW = 2
HELD_BY_CALLER = 3


@njit(nogil=True)
def cc_lock_or_insert(cells, key, tid):
    """Lock ``key``'s cell, installing a locked placeholder if absent.

    Returns ``(code, slot)``.  Placeholders are only ever claimed from EMPTY
    cells, so two threads cannot install the same key twice.
    """
    mask = np.uint64(cells.shape[0] - 1)
    mine = np.uint64(tid + 1) << LOCK_SHIFT
    pos = mix64(key) & mask
    while True:
        cur = _atomic.load(cells, pos)
        payload = cur & PAYLOAD_MASK
        if payload == key:
            owner = cur >> LOCK_SHIFT
            if owner == np.uint64(tid + 1):
                return HELD_BY_CALLER, np.int64(pos)
            if owner != np.uint64(0):
                return BUSY, np.int64(pos)
            if _atomic.cas(cells, pos, cur, cur | mine) == cur:
                return LOCKED_PRESENT, np.int64(pos)
            continue  # cell changed under us; look again
        if cur == EMPTY:
            if _atomic.cas(cells, pos, EMPTY, key | mine) == EMPTY:
                return LOCKED_NEW, np.int64(pos)
            continue
        pos = (pos + np.uint64(1)) & mask


@njit(nogil=True)
def cc_release(cells, slot, key, tid, drop):
    """Clear the lock; ``drop`` turns the cell into a tombstone instead."""
    held = key | (np.uint64(tid + 1) << LOCK_SHIFT)
    new = TOMBSTONE if drop else key
    return _atomic.cas(cells, slot, held, new) == held


@njit(nogil=True)
def cc_contains(cells, key):
    mask = np.uint64(cells.shape[0] - 1)
    pos = mix64(key) & mask
    while True:
        cur = _atomic.load(cells, pos)
        if (cur & PAYLOAD_MASK) == key:
            return True
        if cur == EMPTY:
            return False
        pos = (pos + np.uint64(1)) & mask


@njit(nogil=True, cache=True)
def _cc_lock_or_insert_py(cells, key, tid):
    return cc_lock_or_insert(cells, key, tid)


@njit(nogil=True, cache=True)
def _cc_release_py(cells, slot, key, tid, drop):
    return cc_release(cells, slot, key, tid, drop)


@njit(nogil=True, cache=True)
def _cc_contains_py(cells, key):
    return cc_contains(cells, key)


@njit(cache=True)
def cc_fill(cells, keys):
    mask = np.uint64(cells.shape[0] - 1)
    for k in range(keys.shape[0]):
        key = keys[k]
        pos = mix64(key) & mask
        while True:
            cur = cells[pos]
            if cur == key:
                break
            if cur == EMPTY:
                cells[pos] = key
                break
            pos = (pos + np.uint64(1)) & mask


@njit(cache=True)
def cc_rebuild(cells):
    """Drop tombstones in place; returns -1 if any cell is still locked."""
    live = 0
    for i in range(cells.shape[0]):
        c = cells[i]
        if c != EMPTY and c != TOMBSTONE:
            if (c >> LOCK_SHIFT) != np.uint64(0):
                return -1
            live += 1
    keys = np.empty(live, dtype=np.uint64)
    t = 0
    for i in range(cells.shape[0]):
        c = cells[i]
        if c != EMPTY and c != TOMBSTONE:
            keys[t] = c
            t += 1
        cells[i] = EMPTY
    cc_fill(cells, keys)
    return live


@dataclass
class Ticket:
    edge: tuple[int, int]
    bucket: int
    was_present: bool
    owner: int
    finalized: bool = False
    valid: bool = True


class ConcurrentEdgeSet:
    """Lockable edge set safe for up to 254 threads.

    Tickets certify exclusive access to one edge's cell.  ``lock_or_insert``
    raises :class:`Busy` when another thread holds the edge.
    """

    def __init__(self, capacity: int):
        self.cells = np.zeros(max(16, next_pow2(capacity)), dtype=np.uint64)

    @classmethod
    def from_words(cls, words, capacity: int | None = None) -> "ConcurrentEdgeSet":
        words = np.asarray(words, dtype=np.uint64)
        s = cls(capacity or table_capacity(len(words)))
        cc_fill(s.cells, words)
        return s

    @property
    def capacity(self) -> int:
        return len(self.cells)

    def lock_or_insert(self, e, tid: int) -> Ticket:
        if not 0 <= tid < MAX_THREADS:
            raise ValueError("thread id must lie in [0, 254)")
        key = edge_word(e)
        code, slot = _cc_lock_or_insert_py(self.cells, key, tid)
        if code == BUSY:
            raise Busy(f"edge {e} is locked by another thread")
        if code == HELD_BY_CALLER:
            raise InvariantViolation(f"thread {tid} already holds edge {e}")
        u, v = int(key) >> 28, int(key) & (MAX_NODES - 1)
        return Ticket((u, v), int(slot), code == LOCKED_PRESENT, tid)

    def _check(self, t: Ticket):
        if not t.valid:
            raise StaleTicket("ticket already consumed")
        key = np.uint64((t.edge[0] << 28) | t.edge[1])
        held = key | (np.uint64(t.owner + 1) << LOCK_SHIFT)
        if self.cells[t.bucket] != held:
            raise StaleTicket("cell no longer held by this ticket")
        return key

    def finalize_insert(self, t: Ticket) -> bool:
        self._check(t)
        if t.was_present:
            return False
        t.finalized = True
        return True

    def erase_locked(self, t: Ticket) -> None:
        key = self._check(t)
        if not t.was_present and not t.finalized:
            raise StaleTicket("cannot erase an unfinalized placeholder")
        if not _cc_release_py(self.cells, t.bucket, key, t.owner, True):
            raise StaleTicket("lost the cell while erasing")
        t.valid = False

    def release(self, t: Ticket) -> None:
        key = self._check(t)
        drop = not t.was_present and not t.finalized
        if not _cc_release_py(self.cells, t.bucket, key, t.owner, drop):
            raise StaleTicket("lost the cell while releasing")
        t.valid = False

    def contains(self, e) -> bool:
        return bool(_cc_contains_py(self.cells, edge_word(e)))

    __contains__ = contains

    def words(self) -> np.ndarray:
        """Quiescent scan of live payloads (locked placeholders included)."""
        c = self.cells
        live = c[(c != EMPTY) & (c != TOMBSTONE)]
        return np.sort(live & PAYLOAD_MASK)

    def __len__(self):
        c = self.cells
        return int(np.count_nonzero((c != EMPTY) & (c != TOMBSTONE)))

    def tombstones(self) -> int:
        return int(np.count_nonzero(self.cells == TOMBSTONE))

    def rebuild(self) -> int:
        live = int(cc_rebuild(self.cells))
        if live < 0:
            raise InvariantViolation("rebuild requested while a cell is locked")
        return live
