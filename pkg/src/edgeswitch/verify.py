"""Exhaustive state spaces and uniformity checks for tiny degree sequences.

Sampling runs many independent chains at once.  Every sample owns one row of
a 2-d edge array and, depending on the algorithm, one row of hash-set cells or
one segment of a shared dependency table.  The per-row work calls the same
kernels the single-graph chains use.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit
from scipy.stats import chi2

from .chain import DEFAULT_PL, apply_switch_kernel, es_superstep_size
from .edgeset import ConcurrentEdgeSet, SequentialEdgeSet, cc_rebuild, table_capacity
from .errors import NotGraphical, TooLarge, UnknownState
from .graph import EdgeList, canonical_words, havel_hakimi, is_graphical
from .parallel import ALGORITHMS, DependencyTable, WorkerPool, eager_worker, steady_rounds, tombstone_count
from .rng import RandomStream, batch_permutations

Key = tuple  # sorted tuple of canonical (u, v) pairs

MAX_ENUM_NODES = 8
MAX_ENUM_PAIRS = 28


@dataclass(frozen=True)
class StateSpace:
    degrees: tuple
    keys: tuple

    def __len__(self):
        return len(self.keys)

    def __iter__(self):
        return iter(self.keys)

    def __contains__(self, key):
        return key in self._index

    @property
    def _index(self):
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {k: i for i, k in enumerate(self.keys)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def index(self, key) -> int:
        return self._index[key]


def enumerate_graphs(d) -> StateSpace:
    """All labeled simple graphs with degree sequence exactly ``d``."""
    d = tuple(int(x) for x in d)
    n = len(d)
    if n > MAX_ENUM_NODES or n * (n - 1) // 2 > MAX_ENUM_PAIRS:
        raise TooLarge(f"cannot enumerate graphs on {n} nodes")
    if any(x < 0 for x in d):
        raise ValueError("degrees must be non-negative")
    pairs = list(combinations(range(n), 2))
    remaining = list(d)
    chosen: list[tuple[int, int]] = []
    out = []

    # pairs are visited in lexicographic order, so once the search moves past
    # all pairs containing node u, u's remaining degree must be zero
    last_pair_of = {u: max((i for i, p in enumerate(pairs) if u in p), default=-1) for u in range(n)}

    def rec(pos):
        if pos == len(pairs):
            if not any(remaining):
                out.append(tuple(chosen))
            return
        u, v = pairs[pos]
        if remaining[u] and remaining[v]:
            remaining[u] -= 1
            remaining[v] -= 1
            chosen.append((u, v))
            rec(pos + 1)
            chosen.pop()
            remaining[u] += 1
            remaining[v] += 1
        if (last_pair_of[u] == pos and remaining[u]) or (last_pair_of[v] == pos and remaining[v]):
            return
        rec(pos + 1)

    rec(0)
    return StateSpace(d, tuple(sorted(out)))


def _key_graph(key, n) -> EdgeList:
    return EdgeList(n, np.array(key, dtype=np.int64).reshape(-1, 2))


@njit(cache=True)
def _es_successors(words, buckets, out_words):
    """Apply every ordered descriptor to a fresh copy; rows of ``out_words`` get the results."""
    m = words.shape[0]
    t = 0
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            for g in range(2):
                e = words.copy()
                b = buckets.copy()
                apply_switch_kernel(e, b, i, j, g)
                out_words[t, :] = e
                t += 1


def exact_es_transition_counts(key, n: int | None = None) -> dict:
    """Number of ordered descriptors ``(i, j, g)`` leading from ``key`` to each successor."""
    key = tuple(tuple(int(x) for x in e) for e in key)
    if n is None:
        n = 1 + max((max(e) for e in key), default=-1)
    g = _key_graph(key, n)
    m = g.m
    if m < 2:
        return {key: 0}
    words = g.words()
    s = SequentialEdgeSet.from_words(canonical_words(words), table_capacity(m))
    out = np.empty((2 * m * (m - 1), m), dtype=np.uint64)
    _es_successors(words, s.buckets, out)
    rows = np.sort(canonical_words(out.ravel()).reshape(out.shape), axis=1)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    result = {}
    for row, c in zip(uniq, counts):
        result[tuple((int(w) >> 28, int(w) & ((1 << 28) - 1)) for w in row)] = int(c)
    return result


def transition_graph_strongly_connected(space: StateSpace) -> bool:
    """True iff every state reaches every other one under ES-MC moves."""
    keys = list(space)
    if len(keys) <= 1:
        return True
    n = len(space.degrees)
    adj = {k: [s for s in exact_es_transition_counts(k, n) if s != k] for k in keys}
    radj = {k: [] for k in keys}
    for a, succ in adj.items():
        for b in succ:
            radj[b].append(a)

    def reach(graph):
        seen = {keys[0]}
        todo = deque([keys[0]])
        while todo:
            for nxt in graph[todo.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return len(seen) == len(keys)

    return reach(adj) and reach(radj)


# ---------------------------------------------------------------------------
# batched sampling


@njit(cache=True)
def _batch_es(edges, buckets, ii, jj, gg):
    for s in range(edges.shape[0]):
        row = edges[s]
        b = buckets[s]
        for t in range(ii.shape[1]):
            apply_switch_kernel(row, b, ii[s, t], jj[s, t], gg[s, t])


@njit(cache=True)
def _batch_global(edges, buckets, ells, gg):
    for s in range(edges.shape[0]):
        row = edges[s]
        b = buckets[s]
        for k in range(ells[s]):
            apply_switch_kernel(row, b, 2 * k, 2 * k + 1, gg[s, k])


@njit
def _batch_eager(edges, cells, ii, jj, gg, per_step, counts):
    m = edges.shape[1]
    for s in range(edges.shape[0]):
        row = edges[s]
        c = cells[s]
        for lo in range(0, ii.shape[1], per_step):
            hi = lo + per_step
            eager_worker(row, c, ii[s, lo:hi], jj[s, lo:hi], gg[s, lo:hi], 0, counts)
            if tombstone_count(c) > m:
                cc_rebuild(c)


def _draw_es(gen, rows, m, count):
    i = gen.integers(0, m, size=(rows, count), dtype=np.int64)
    j = gen.integers(0, m - 1, size=(rows, count), dtype=np.int64)
    j += j >= i
    g = gen.integers(0, 2, size=(rows, count), dtype=np.uint8)
    return i, j, g


def _draw_global(stream, edges, p_l):
    rows, m = edges.shape
    perms = batch_permutations(stream, rows, m)
    edges[:] = np.take_along_axis(edges, perms, axis=1)
    ells = stream.generator.binomial(m // 2, 1.0 - p_l, size=rows).astype(np.int64)
    g = stream.generator.integers(0, 2, size=(rows, m // 2), dtype=np.uint8)
    return ells, g


def run_batch(algo: str, start: EdgeList, rows: int, supersteps: int, stream: RandomStream,
              threads: int = 1, p_l: float = DEFAULT_PL) -> np.ndarray:
    """Run ``rows`` independent chains from ``start``; returns the final (rows, m) word arrays."""
    m = start.m
    edges = np.tile(start.words(), (rows, 1))
    if m < 2 or supersteps == 0 or rows == 0:
        return edges
    gen = stream.generator
    if algo in ("es", "global-es"):
        proto = SequentialEdgeSet.from_words(start.canonical_words(), table_capacity(m)).buckets
        buckets = np.tile(proto, (rows, 1))
        if algo == "es":
            i, j, g = _draw_es(gen, rows, m, supersteps * es_superstep_size(m))
            _batch_es(edges, buckets, i, j, g)
        else:
            for _ in range(supersteps):
                ells, g = _draw_global(stream, edges, p_l)
                _batch_global(edges, buckets, ells, g)
    elif algo == "eager-es":
        if threads != 1:
            raise ValueError("eager-es is only a faithful ES-MC with one thread")
        proto = ConcurrentEdgeSet.from_words(start.canonical_words(), table_capacity(m)).cells
        cells = np.tile(proto, (rows, 1))
        per_step = es_superstep_size(m)
        i, j, g = _draw_es(gen, rows, m, supersteps * per_step)
        _batch_eager(edges, cells, i, j, g, per_step, np.zeros(4, dtype=np.int64))
    elif algo == "steady-global-es":
        table = DependencyTable(m, rows)
        flat = edges.reshape(-1)
        with WorkerPool(threads) as pool:
            for _ in range(supersteps):
                ells, g = _draw_global(stream, edges, p_l)
                steady_rounds(flat, m, ells, g.reshape(-1), pool, table)
    else:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    return edges


def sample_distribution(algo: str, d, supersteps: int, samples: int, seed=None, threads: int = 1,
                        p_l: float = DEFAULT_PL, block: int = 20000, space: StateSpace | None = None) -> dict:
    """Histogram of final states over ``samples`` independent runs from the Havel-Hakimi graph."""
    space = space or enumerate_graphs(d)
    if not is_graphical(d):
        raise NotGraphical(f"degree sequence {tuple(d)} is not graphical")
    start = havel_hakimi(d)
    stream = RandomStream(seed)
    hist: dict = {}
    done = 0
    while done < samples:
        rows = min(block, samples - done)
        final = run_batch(algo, start, rows, supersteps, stream, threads, p_l)
        keys = np.sort(canonical_words(final.ravel()).reshape(final.shape), axis=1)
        uniq, counts = np.unique(keys, axis=0, return_counts=True)
        for row, c in zip(uniq, counts):
            key = tuple((int(w) >> 28, int(w) & ((1 << 28) - 1)) for w in row)
            if key not in space:
                raise UnknownState(f"sampled graph {key} is not in the state space")
            hist[key] = hist.get(key, 0) + int(c)
        done += rows
    return hist


@dataclass
class UniformityResult:
    statistic: float
    dof: int
    critical: float
    passed: bool


def chi_square_uniformity(hist: dict, space, alpha: float = 0.001) -> UniformityResult:
    """Pearson chi-square of ``hist`` against the uniform distribution over ``space``."""
    keys = list(space)
    known = set(keys)
    for k in hist:
        if k not in known:
            raise UnknownState(f"histogram key {k} is not in the state space")
    total = sum(hist.values())
    if total < 10 * len(keys):
        raise ValueError("need at least 10 samples per state")
    dof = len(keys) - 1
    if dof == 0:
        return UniformityResult(0.0, 0, 0.0, True)
    observed = np.array([hist.get(k, 0) for k in keys], dtype=np.float64)
    expected = total / len(keys)
    stat = float(((observed - expected) ** 2 / expected).sum())
    crit = float(chi2.ppf(1.0 - alpha, dof))
    return UniformityResult(stat, dof, crit, stat <= crit)


def histogram_rows(hist: dict, space) -> list[dict]:
    return [{"state": " ".join(f"{u}-{v}" for u, v in k), "count": hist.get(k, 0)} for k in space]
