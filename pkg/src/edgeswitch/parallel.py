"""Parallel chains: EagerES and SteadyGlobalES.

Both run ``nogil`` numba kernels on a small pool of Python threads.  Random
choices are drawn up front in numpy so the kernels only touch shared arrays.

EagerES locks edges in a :class:`ConcurrentEdgeSet` and is only equivalent to
ES-MC with one thread.  SteadyGlobalES decides the switches of a global switch
in rounds from a dependency table, so its result does not depend on the
number of threads or their scheduling.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from . import _atomic
from .chain import DEFAULT_PL, ChainState, SuperstepRecord, run_es_supersteps, run_global_es, switch_targets
from .edgeset import (
    BUSY,
    EMPTY,
    LOCKED_NEW,
    LOCKED_PRESENT,
    MAX_THREADS,
    TOMBSTONE,
    ConcurrentEdgeSet,
    cc_lock_or_insert,
    cc_release,
    mix64,
    table_capacity,
)
from .errors import InvariantViolation
from .graph import EdgeList, canonical_words, nb_canon, nb_pack, nb_split
from .rng import RandomStream, RandomSwitchSource, SwitchSource

ALGORITHMS = ("es", "global-es", "eager-es", "steady-global-es")


def default_threads() -> int:
    return max(1, min(os.cpu_count() or 1, MAX_THREADS))


class WorkerPool:
    """Fork-join helper: splits ``range(n)`` into one chunk per thread."""

    def __init__(self, threads: int = 1):
        if not 1 <= threads <= MAX_THREADS:
            raise ValueError(f"threads must lie in [1, {MAX_THREADS}]")
        self.threads = threads
        self._ex = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def chunks(self, n: int):
        step = -(-n // self.threads) if n else 0
        return [(lo, min(n, lo + step)) for lo in range(0, n, step)] if step else []

    def run(self, kernel, n: int, *args):
        """Call ``kernel(lo, hi, *args, tid)`` on every chunk and wait for all."""
        if self._ex is None or n < 2:
            kernel(0, n, *args, 0)
            return
        futures = [self._ex.submit(kernel, lo, hi, *args, tid) for tid, (lo, hi) in enumerate(self.chunks(n))]
        for f in futures:
            f.result()

    def map(self, fn, items):
        if self._ex is None:
            return [fn(x) for x in items]
        return list(self._ex.map(fn, items))

    def close(self):
        if self._ex is not None:
            self._ex.shutdown()
            self._ex = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# EagerES

MAX_BACKOFF_SPINS = 1024


@njit(nogil=True, inline="always")
def _backoff(cells, spins):
    for _ in range(spins):
        _atomic.load(cells, 0)
    _atomic.cpu_yield()
    return min(spins * 2, MAX_BACKOFF_SPINS)


@njit(nogil=True)
def eager_worker(edges, cells, ii, jj, gg, tid, counts):
    """Run one thread's share of EagerES attempts.

    ``counts`` receives accepted, rejected-loop, rejected-existing and the
    number of lock retries.  Every descriptor is counted once.
    """
    for t in range(ii.shape[0]):
        i = ii[t]
        j = jj[t]
        g = gg[t]
        spins = 1
        while True:
            e1 = _atomic.load(edges, i)
            e2 = _atomic.load(edges, j)
            a, b = nb_split(e1)
            x, y = nb_split(e2)
            k1 = nb_canon(a, b)
            k2 = nb_canon(x, y)
            if k1 == k2:
                # stale read of a slot that is being rewritten
                counts[3] += 1
                spins = _backoff(cells, spins)
                continue
            code1, s1 = cc_lock_or_insert(cells, k1, tid)
            if code1 != LOCKED_PRESENT:
                if code1 == LOCKED_NEW:
                    cc_release(cells, s1, k1, tid, True)
                counts[3] += 1
                spins = _backoff(cells, spins)
                continue
            if _atomic.load(edges, i) != e1:
                cc_release(cells, s1, k1, tid, False)
                counts[3] += 1
                continue
            code2, s2 = cc_lock_or_insert(cells, k2, tid)
            if code2 != LOCKED_PRESENT:
                if code2 == LOCKED_NEW:
                    cc_release(cells, s2, k2, tid, True)
                cc_release(cells, s1, k1, tid, False)
                counts[3] += 1
                spins = _backoff(cells, spins)
                continue
            if _atomic.load(edges, j) != e2:
                cc_release(cells, s2, k2, tid, False)
                cc_release(cells, s1, k1, tid, False)
                counts[3] += 1
                continue

            p, q, r, s = switch_targets(e1, e2, g)
            if p == q or r == s:
                cc_release(cells, s2, k2, tid, False)
                cc_release(cells, s1, k1, tid, False)
                counts[1] += 1
                break
            k3 = nb_canon(p, q)
            k4 = nb_canon(r, s)
            if k3 == k1 or k3 == k2 or k4 == k1 or k4 == k2:
                # the switch recreates its own sources
                cc_release(cells, s2, k2, tid, False)
                cc_release(cells, s1, k1, tid, False)
                counts[2] += 1
                break
            code3, s3 = cc_lock_or_insert(cells, k3, tid)
            if code3 == BUSY:
                cc_release(cells, s2, k2, tid, False)
                cc_release(cells, s1, k1, tid, False)
                counts[3] += 1
                spins = _backoff(cells, spins)
                continue
            if code3 == LOCKED_PRESENT:
                cc_release(cells, s3, k3, tid, False)
                cc_release(cells, s2, k2, tid, False)
                cc_release(cells, s1, k1, tid, False)
                counts[2] += 1
                break
            code4, s4 = cc_lock_or_insert(cells, k4, tid)
            if code4 == BUSY:
                cc_release(cells, s3, k3, tid, True)
                cc_release(cells, s2, k2, tid, False)
                cc_release(cells, s1, k1, tid, False)
                counts[3] += 1
                spins = _backoff(cells, spins)
                continue
            if code4 == LOCKED_PRESENT:
                cc_release(cells, s4, k4, tid, False)
                cc_release(cells, s3, k3, tid, True)
                cc_release(cells, s2, k2, tid, False)
                cc_release(cells, s1, k1, tid, False)
                counts[2] += 1
                break
            _atomic.store(edges, i, nb_pack(p, q))
            _atomic.store(edges, j, nb_pack(r, s))
            cc_release(cells, s1, k1, tid, True)
            cc_release(cells, s2, k2, tid, True)
            cc_release(cells, s3, k3, tid, False)
            cc_release(cells, s4, k4, tid, False)
            counts[0] += 1
            break


@njit(nogil=True, cache=True)
def tombstone_count(cells):
    t = 0
    for c in cells:
        if c == TOMBSTONE:
            t += 1
    return t


def _eager_thread(lo, hi, edges, cells, ii, jj, gg, counts, tid):
    eager_worker(edges, cells, ii[lo:hi], jj[lo:hi], gg[lo:hi], tid, counts[tid])


class EagerES:
    """EagerES chain over a private copy of a graph.

    With more than one thread the result depends on scheduling and the chain
    is biased; it is provided as a performance baseline only.
    """

    def __init__(self, graph: EdgeList, threads: int = 1, source: SwitchSource | None = None, seed=None):
        if not graph.is_simple():
            raise InvariantViolation("chain input must be a simple graph")
        if not 1 <= threads <= MAX_THREADS:
            raise ValueError(f"EagerES supports at most {MAX_THREADS} threads")
        self.n = graph.n
        self.edges = graph.words()
        self.edge_set = ConcurrentEdgeSet.from_words(canonical_words(self.edges), table_capacity(graph.m))
        self.pool = WorkerPool(threads)
        self.source = source if source is not None else RandomSwitchSource(RandomStream(seed))
        self.counts = np.zeros((threads, 4), dtype=np.int64)
        self.supersteps = 0
        self.records: list[SuperstepRecord] = []

    @property
    def m(self):
        return len(self.edges)

    def attempt(self, num_switches: int) -> np.ndarray:
        """Run ``num_switches`` attempts; returns (accepted, loop, existing, retries)."""
        before = self.counts.sum(axis=0)
        if self.m < 2:
            return np.zeros(4, dtype=np.int64)
        # small batches bound the empty cells consumed between rebuild checks
        batch = max(1, math.ceil(self.m / 8))
        remaining = num_switches
        while remaining > 0:
            chunk = min(remaining, batch)
            ii, jj, gg = self.source.es_switches(self.m, chunk)
            self.pool.run(_eager_thread, chunk, self.edges, self.edge_set.cells, ii, jj, gg, self.counts)
            remaining -= chunk
            if self.edge_set.tombstones() > self.m:
                self.edge_set.rebuild()
        return self.counts.sum(axis=0) - before

    def superstep(self):
        t0 = time.perf_counter()
        c = self.attempt(math.ceil(self.m / 2))
        self.supersteps += 1
        rec = SuperstepRecord(self.supersteps, int(c[0]), int(c[1]), int(c[2]), time.perf_counter() - t0)
        self.records.append(rec)
        return rec

    def edge_list(self) -> EdgeList:
        return EdgeList.from_words(self.n, self.edges)

    def canonical_words(self):
        return canonical_words(self.edges)

    def close(self):
        self.pool.close()


def eager_es(graph: EdgeList, num_switches: int, threads: int = 1, seed=None, source=None) -> EdgeList:
    chain = EagerES(graph, threads, source=source, seed=seed)
    try:
        chain.attempt(num_switches)
        return chain.edge_list()
    finally:
        chain.close()


# ---------------------------------------------------------------------------
# SteadyGlobalES
#
# The dependency table is an open-addressing multimap: ``keys`` holds the
# canonical edge word (0 marks an empty cell) and ``vals`` holds
# ``index << 1 | op``.  Tables for several independent instances ("segments")
# can share one array, each segment owning ``capacity`` consecutive cells.
# Switch ``k`` of segment ``s`` has global id ``s * half + k`` where
# ``half = m // 2``.

ERASE = 0
INSERT = 1
UNDECIDED = 0
LEGAL = 1
ILLEGAL = 2
DELAY = 3
LOOP = 4  # ILLEGAL because a target is a loop; kept apart for the counters
INFINITY = 1 << 40


@njit(nogil=True, inline="always")
def _table_put(keys, vals, base, mask, key, val):
    pos = mix64(key) & mask
    while True:
        cell = base + np.int64(pos)
        if keys[cell] == EMPTY and _atomic.cas(keys, cell, EMPTY, key) == EMPTY:
            vals[cell] = val
            return
        pos = (pos + np.uint64(1)) & mask


@njit(nogil=True, inline="always")
def _word_key(w):
    u, v = nb_split(w)
    return nb_canon(u, v)


@njit(nogil=True, cache=True)
def announce_kernel(lo, hi, edges, m, half, ells, gbits, keys, vals, capacity, tid):
    mask = np.uint64(capacity - 1)
    for p in range(lo, hi):
        seg = p // m
        r = p - seg * m
        k = r // 2
        base = seg * capacity
        if k < ells[seg]:
            _table_put(keys, vals, base, mask, _word_key(edges[p]), (k << 1) | ERASE)
            if r % 2 == 0:
                a, b, c, d = switch_targets(edges[p], edges[p + 1], gbits[seg * half + k])
                if a != b:
                    _table_put(keys, vals, base, mask, nb_canon(a, b), (k << 1) | INSERT)
                if c != d:
                    _table_put(keys, vals, base, mask, nb_canon(c, d), (k << 1) | INSERT)
        else:
            _table_put(keys, vals, base, mask, _word_key(edges[p]), (INFINITY << 1) | ERASE)


@njit(nogil=True, inline="always")
def _target_rule(keys, vals, status, base, mask, sbase, key, k):
    """Decision contributed by one target edge of switch ``k``."""
    erase_at = -1
    first_insert = INFINITY
    pos = mix64(key) & mask
    while True:
        cell = base + np.int64(pos)
        kk = keys[cell]
        if kk == EMPTY:
            break
        if kk == key:
            v = vals[cell]
            idx = v >> 1
            if (v & 1) == ERASE:
                erase_at = idx
            elif idx < k and idx < first_insert and _atomic.load(status, sbase + idx) != ILLEGAL:
                first_insert = idx
        pos = (pos + np.uint64(1)) & mask
    pending = False
    if erase_at >= 0:
        # present at the start; the own-source case counts as still present
        if erase_at >= k:
            return ILLEGAL
        se = _atomic.load(status, sbase + erase_at)
        if se == ILLEGAL:
            return ILLEGAL
        if se == UNDECIDED:
            pending = True
    if first_insert < k:
        # statuses only move forward, so a stale read can delay but never mislead
        if _atomic.load(status, sbase + first_insert) == LEGAL:
            return ILLEGAL
        pending = True
    return DELAY if pending else LEGAL


@njit(nogil=True, inline="always")
def _commit(edges, m, half, gbits, status, sid, d):
    if d == LEGAL:
        seg = sid // half
        p = seg * m + 2 * (sid - seg * half)
        a, b, c, e = switch_targets(edges[p], edges[p + 1], gbits[sid])
        edges[p] = nb_pack(a, b)
        edges[p + 1] = nb_pack(c, e)
        _atomic.store(status, sid, np.int8(LEGAL))
    else:
        _atomic.store(status, sid, np.int8(ILLEGAL))


@njit(nogil=True, cache=True)
def decide_kernel(lo, hi, undecided, edges, m, half, gbits, keys, vals, capacity, status, decision, early, tid):
    """Decide switches ``undecided[lo:hi]``.

    With ``early`` set, each decision is committed at once and becomes visible
    to switches decided later in the same round; otherwise the caller commits
    the whole round afterwards.
    """
    mask = np.uint64(capacity - 1)
    for t in range(lo, hi):
        sid = undecided[t]
        seg = sid // half
        k = sid - seg * half
        p = seg * m + 2 * k
        a, b, c, d = switch_targets(edges[p], edges[p + 1], gbits[sid])
        if a == b or c == d:
            res = LOOP
        else:
            base = seg * capacity
            sbase = seg * half
            res = _target_rule(keys, vals, status, base, mask, sbase, nb_canon(a, b), k)
            if res != ILLEGAL:
                r2 = _target_rule(keys, vals, status, base, mask, sbase, nb_canon(c, d), k)
                if r2 == ILLEGAL or r2 == DELAY:
                    res = r2
        decision[sid] = res
        if early and res != DELAY:
            _commit(edges, m, half, gbits, status, sid, res)


@njit(nogil=True, cache=True)
def commit_kernel(lo, hi, undecided, edges, m, half, gbits, status, decision, tid):
    for t in range(lo, hi):
        sid = undecided[t]
        d = decision[sid]
        if d != DELAY:
            _commit(edges, m, half, gbits, status, sid, d)


class DependencyTable:
    """Per-segment dependency multimaps stored in two flat arrays."""

    def __init__(self, m: int, segments: int = 1):
        self.capacity = table_capacity(m)
        self.keys = np.zeros(segments * self.capacity, dtype=np.uint64)
        self.vals = np.zeros(segments * self.capacity, dtype=np.int64)

    def clear(self):
        self.keys.fill(0)

    def tuples(self, segment: int = 0):
        """All stored ``(edge word, index, op)`` of one segment; INFINITY index as ``None``."""
        lo = segment * self.capacity
        keys = self.keys[lo:lo + self.capacity]
        vals = self.vals[lo:lo + self.capacity]
        out = []
        for key, v in zip(keys[keys != 0], vals[keys != 0]):
            idx = int(v) >> 1
            out.append((int(key), None if idx == INFINITY else idx, "insert" if v & 1 else "erase"))
        return out

    def count(self, segment: int = 0) -> int:
        lo = segment * self.capacity
        return int(np.count_nonzero(self.keys[lo:lo + self.capacity]))


def announce(table: DependencyTable, edges, ells, gbits, pool: WorkerPool, m: int | None = None):
    """Store erase/insert tuples for every segment of ``edges``."""
    ells = np.atleast_1d(np.asarray(ells, dtype=np.int64))
    m = len(edges) // len(ells) if m is None else m
    half = m // 2
    pool.run(announce_kernel, len(edges), edges, m, half, ells, gbits, table.keys, table.vals, table.capacity)


def steady_rounds(edges, m: int, ells, gbits, pool: WorkerPool, table: DependencyTable | None = None,
                  snapshot: bool = False):
    """Run one global switch on every segment; ``edges`` must already be permuted.

    ``gbits`` holds ``m // 2`` direction bits per segment (only the first
    ``ell`` are used).  Returns ``(rounds, decision)`` where ``decision`` has
    the final code of every switch id.

    ``snapshot`` makes every round decide from the statuses at the start of
    the round.  The round count is then the dependency depth, independent of
    threads; the resulting graph is the same either way.
    """
    ells = np.atleast_1d(np.asarray(ells, dtype=np.int64))
    segments = len(ells)
    half = m // 2
    if len(edges) != segments * m or len(gbits) != segments * half:
        raise ValueError("edge or bit array does not match the segment layout")
    decision = np.zeros(segments * half, dtype=np.int8)
    if half == 0 or not ells.any():
        return 0, decision
    if table is None:
        table = DependencyTable(m, segments)
    else:
        table.clear()
    announce(table, edges, ells, gbits, pool, m)
    status = np.zeros(segments * half, dtype=np.int8)
    undecided = (np.arange(segments, dtype=np.int64)[:, None] * half + np.arange(half)[None, :])[
        np.arange(half)[None, :] < ells[:, None]
    ]
    rounds = 0
    while len(undecided):
        rounds += 1
        pool.run(decide_kernel, len(undecided), undecided, edges, m, half, gbits,
                 table.keys, table.vals, table.capacity, status, decision, not snapshot)
        if snapshot:
            pool.run(commit_kernel, len(undecided), undecided, edges, m, half, gbits, status, decision)
        delayed = undecided[decision[undecided] == DELAY]
        if len(delayed) >= len(undecided):
            raise InvariantViolation("round made no progress")
        undecided = delayed
    return rounds, decision


DECISION_NAMES = {LEGAL: "legal", ILLEGAL: "illegal", LOOP: "illegal", DELAY: "delay"}


def new_status(ell: int) -> np.ndarray:
    return np.zeros(ell, dtype=np.int8)


def decide_switch(table: DependencyTable, edges, k: int, gbits, status) -> str:
    """Decide switch ``k`` of a single announced instance without committing it."""
    m = len(edges)
    half = m // 2
    bits = np.zeros(half, dtype=np.uint8)
    bits[:len(gbits)] = gbits
    st = np.zeros(half, dtype=np.int8)
    st[:len(status)] = status
    decision = np.zeros(half, dtype=np.int8)
    decide_kernel(0, 1, np.array([k], dtype=np.int64), edges, m, half, bits,
                  table.keys, table.vals, table.capacity, st, decision, False, 0)
    return DECISION_NAMES[int(decision[k])]


def outcome_counts(decision) -> np.ndarray:
    """(accepted, rejected-loop, rejected-existing) from final decision codes."""
    c = np.bincount(decision, minlength=5)
    return np.array([c[LEGAL], c[LOOP], c[ILLEGAL]], dtype=np.int64)


def steady_global_switch(edges, ell: int, gbits, threads: int = 1, pool: WorkerPool | None = None,
                         snapshot: bool = False):
    """Execute switches ``0..ell-1`` on slot pairs of an already permuted array in place.

    Returns ``(rounds, counts)``.
    """
    m = len(edges)
    half = m // 2
    bits = np.zeros(half, dtype=np.uint8)
    bits[:ell] = np.asarray(gbits, dtype=np.uint8)[:ell]
    own = pool is None
    pool = pool or WorkerPool(threads)
    try:
        rounds, decision = steady_rounds(edges, m, [ell], bits, pool, snapshot=snapshot)
    finally:
        if own:
            pool.close()
    return rounds, outcome_counts(decision)


class SteadyGlobalES:
    """G-ES-MC executed by SteadyGlobalES."""

    def __init__(self, graph: EdgeList, threads: int = 1, p_l: float = DEFAULT_PL,
                 source: SwitchSource | None = None, seed=None, snapshot: bool = False):
        if not graph.is_simple():
            raise InvariantViolation("chain input must be a simple graph")
        if not 0.0 < p_l < 1.0:
            raise ValueError("P_L must lie in (0, 1)")
        self.n = graph.n
        self.p_l = p_l
        self.snapshot = snapshot
        self.edges = graph.words()
        self.pool = WorkerPool(threads)
        self.table = DependencyTable(graph.m)
        self.source = source if source is not None else RandomSwitchSource(RandomStream(seed), threads)
        self.supersteps = 0
        self.rounds: list[int] = []
        self.records: list[SuperstepRecord] = []

    @property
    def m(self):
        return len(self.edges)

    def superstep(self):
        t0 = time.perf_counter()
        gs = self.source.global_switch(self.m, self.p_l)
        self.edges[:] = self.edges[gs.perm]
        half = self.m // 2
        bits = np.zeros(half, dtype=np.uint8)
        bits[:gs.ell] = gs.g
        rounds, decision = steady_rounds(self.edges, self.m, [gs.ell], bits, self.pool, self.table, self.snapshot)
        c = outcome_counts(decision)
        self.supersteps += 1
        self.rounds.append(rounds)
        rec = SuperstepRecord(self.supersteps, int(c[0]), int(c[1]), int(c[2]), time.perf_counter() - t0, rounds)
        self.records.append(rec)
        return rec

    def rounds_histogram(self) -> dict[int, int]:
        values, counts = np.unique(np.asarray(self.rounds, dtype=np.int64), return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def edge_list(self) -> EdgeList:
        return EdgeList.from_words(self.n, self.edges)

    def canonical_words(self):
        return canonical_words(self.edges)

    def close(self):
        self.pool.close()


def steady_global_es(graph: EdgeList, supersteps: int, p_l: float = DEFAULT_PL, threads: int = 1,
                     seed=None, source: SwitchSource | None = None, snapshot: bool = False) -> SteadyGlobalES:
    chain = SteadyGlobalES(graph, threads, p_l, source=source, seed=seed, snapshot=snapshot)
    try:
        for _ in range(supersteps):
            chain.superstep()
    finally:
        chain.close()
    return chain


# ---------------------------------------------------------------------------
# uniform chain interface


class SequentialChain:
    """ES-MC or G-ES-MC behind the same ``superstep`` interface as the parallel chains."""

    def __init__(self, algo: str, graph: EdgeList, p_l: float = DEFAULT_PL,
                 source: SwitchSource | None = None, seed=None):
        self.algo = algo
        self.state = ChainState.from_graph(graph, p_l)
        self.source = source if source is not None else RandomSwitchSource(RandomStream(seed))
        self._step = run_es_supersteps if algo == "es" else run_global_es

    @property
    def n(self):
        return self.state.n

    @property
    def m(self):
        return self.state.m

    @property
    def edges(self):
        return self.state.edges

    @property
    def records(self):
        return self.state.records

    @property
    def supersteps(self):
        return self.state.supersteps

    def superstep(self):
        self._step(self.state, 1, self.source)
        return self.state.records[-1]

    def edge_list(self) -> EdgeList:
        return self.state.edge_list()

    def canonical_words(self):
        return self.state.canonical_words()

    def close(self):
        pass


def make_chain(algo: str, graph: EdgeList, seed=None, threads: int = 1, p_l: float = DEFAULT_PL,
               source: SwitchSource | None = None):
    if algo in ("es", "global-es"):
        return SequentialChain(algo, graph, p_l, source=source, seed=seed)
    if algo == "eager-es":
        return EagerES(graph, threads, source=source, seed=seed)
    if algo == "steady-global-es":
        return SteadyGlobalES(graph, threads, p_l, source=source, seed=seed)
    raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
