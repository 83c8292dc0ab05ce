"""Edge-list graphs, degree sequences and graph construction.

Edges are packed into 64-bit words as ``(u << 28) | v``.  Inside an edge array
the orientation produced by the last switch is kept (it decides which endpoints
the next switch pairs up); hash keys and comparisons always use the canonical
orientation ``u <= v``.
"""
from __future__ import annotations

import heapq
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .errors import InvalidGraph, NotGraphical, RetriesExhausted

NODE_BITS = 28
MAX_NODES = 1 << NODE_BITS
NODE_MASK = np.uint64(MAX_NODES - 1)
_SHIFT = np.uint64(NODE_BITS)


def canonicalize(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u <= v else (v, u)


def is_loop(e: Sequence[int]) -> bool:
    return e[0] == e[1]


def tau(e1, e2, g: int):
    """Rewire two directed edges; ``g`` selects which endpoints are paired."""
    (a, b), (x, y) = e1, e2
    if g == 0:
        return (a, x), (b, y)
    return (a, y), (b, x)


# ---------------------------------------------------------------------------
# packed representation


def pack(u, v):
    """Pack node pairs (scalars or arrays) into uint64 words, keeping orientation."""
    return (np.asarray(u, dtype=np.uint64) << _SHIFT) | np.asarray(v, dtype=np.uint64)


def unpack(words):
    words = np.asarray(words, dtype=np.uint64)
    return (words >> _SHIFT).astype(np.int64), (words & NODE_MASK).astype(np.int64)


def canonical_words(words) -> np.ndarray:
    """Canonical (min, max) packing of a packed edge array."""
    u, v = unpack(words)
    return pack(np.minimum(u, v), np.maximum(u, v))


@njit(inline="always")
def nb_canon(u, v):
    if u <= v:
        return (u << np.uint64(28)) | v
    return (v << np.uint64(28)) | u


@njit(inline="always")
def nb_split(word):
    return word >> np.uint64(28), word & np.uint64(0xFFFFFFF)


@njit(inline="always")
def nb_pack(u, v):
    return (u << np.uint64(28)) | v


# ---------------------------------------------------------------------------


@dataclass
class EdgeList:
    """An indexed list of undirected edges on nodes ``0..n-1``.

    ``edges`` has shape ``(m, 2)``; row order is the index order used by the
    chains.  Rows are canonical when loaded or generated, but a randomized graph
    keeps the orientation its last switch produced.
    """

    n: int
    edges: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n > MAX_NODES:
            raise InvalidGraph(f"node count {self.n} exceeds 2^{NODE_BITS}")
        if len(self.edges) and (self.edges.min() < 0 or self.edges.max() >= self.n):
            raise InvalidGraph("edge endpoint outside [0, n)")

    @property
    def m(self) -> int:
        return len(self.edges)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]], n: int | None = None) -> "EdgeList":
        arr = np.array(list(pairs), dtype=np.int64).reshape(-1, 2)
        if n is None:
            n = int(arr.max()) + 1 if len(arr) else 0
        return cls(n, arr)

    @classmethod
    def from_words(cls, n: int, words: np.ndarray) -> "EdgeList":
        u, v = unpack(words)
        return cls(n, np.stack([u, v], axis=1))

    def words(self) -> np.ndarray:
        """Packed edges in array order and stored orientation."""
        return pack(self.edges[:, 0], self.edges[:, 1])

    def canonical_words(self) -> np.ndarray:
        return canonical_words(self.words())

    def canonical(self) -> "EdgeList":
        return EdgeList(self.n, np.sort(self.edges, axis=1))

    def sorted(self) -> "EdgeList":
        c = np.sort(self.edges, axis=1)
        order = np.lexsort((c[:, 1], c[:, 0]))
        return EdgeList(self.n, c[order])

    def key(self) -> tuple[tuple[int, int], ...]:
        """Lexicographically sorted canonical edges; equal iff same labeled graph."""
        return tuple(map(tuple, self.sorted().edges.tolist()))

    def is_simple(self) -> bool:
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            return False
        w = self.canonical_words()
        return len(np.unique(w)) == len(w)

    def same_graph(self, other: "EdgeList") -> bool:
        return self.n == other.n and np.array_equal(
            np.sort(self.canonical_words()), np.sort(other.canonical_words())
        )


def degree_sequence_of(g: EdgeList) -> np.ndarray:
    return np.bincount(g.edges.ravel(), minlength=g.n).astype(np.int64)


def is_graphical(d: Sequence[int]) -> bool:
    """Erdős–Gallai test on the descending-sorted sequence."""
    d = np.asarray(d, dtype=np.int64)
    if d.size == 0:
        return True
    if d.min() < 0 or d.sum() % 2:
        return False
    n = d.size
    d = np.sort(d)[::-1]
    prefix = np.concatenate([[0], np.cumsum(d)])
    k = np.arange(1, n + 1)
    ascending = d[::-1]
    # number of entries >= k in the whole sequence
    at_least_k = n - np.searchsorted(ascending, k, side="left")
    split = np.maximum(k, at_least_k)
    rhs = k * (k - 1) + k * (split - k) + (prefix[n] - prefix[split])
    return bool(np.all(prefix[1:] <= rhs))


@njit(cache=True)
def _havel_hakimi(d):
    n = d.shape[0]
    shift = np.int64(1) << np.int64(28)
    heap = [np.int64(0)]
    heap.pop()
    for v in range(n):
        if d[v] > 0:
            heap.append(-d[v] * shift + v)
    heapq.heapify(heap)
    m = d.sum() // 2
    out = np.empty((m, 2), dtype=np.int64)
    taken = np.empty(n, dtype=np.int64)
    pos = 0
    while len(heap) > 0:
        top = heapq.heappop(heap)
        dv = -((top - (top % shift)) // shift)
        v = top % shift
        if dv > len(heap):
            return out[:0], False
        for t in range(dv):
            taken[t] = heapq.heappop(heap)
        for t in range(dv):
            key = taken[t]
            u = key % shift
            du = -((key - u) // shift)
            out[pos, 0] = min(u, v)
            out[pos, 1] = max(u, v)
            pos += 1
            if du > 1:
                heapq.heappush(heap, -(du - 1) * shift + u)
    return out, True


def havel_hakimi(d: Sequence[int]) -> EdgeList:
    """Deterministic realization of ``d``.

    The node with the highest residual degree (lowest id among ties) is joined
    to the next-highest residual degrees, again preferring lower ids.
    """
    d = np.asarray(d, dtype=np.int64)
    if not is_graphical(d):
        raise NotGraphical(f"degree sequence is not graphical (n={d.size}, sum={int(d.sum())})")
    if d.size > MAX_NODES:
        raise InvalidGraph("too many nodes")
    edges, ok = _havel_hakimi(d)
    if not ok:  # unreachable when the Erdős–Gallai test is correct
        raise NotGraphical("Havel-Hakimi failed on a sequence deemed graphical")
    return EdgeList(int(d.size), edges)


def _pair_from_index(idx: np.ndarray):
    """Inverse of ``idx = v (v - 1) / 2 + u`` for ``0 <= u < v``."""
    v = np.floor((1.0 + np.sqrt(1.0 + 8.0 * idx.astype(np.float64))) / 2.0).astype(np.int64)
    # float rounding can be off by one either way
    v = np.where(v * (v - 1) // 2 > idx, v - 1, v)
    v = np.where((v + 1) * v // 2 <= idx, v + 1, v)
    u = idx - v * (v - 1) // 2
    return u, v


def gen_gnp(n: int, p: float, rng) -> EdgeList:
    """G(n, p) by geometric skipping over the C(n,2) candidate pairs."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if n > MAX_NODES:
        raise InvalidGraph("too many nodes")
    total = n * (n - 1) // 2
    if p == 0.0 or total == 0:
        return EdgeList(n, np.empty((0, 2), dtype=np.int64))
    if p == 1.0:
        idx = np.arange(total, dtype=np.int64)
    else:
        gen = rng.generator
        chunks = []
        pos = -1
        batch = max(1024, int(total * p * 1.05) + 64)
        while pos < total:
            gaps = gen.geometric(p, size=batch)
            positions = pos + np.cumsum(gaps)
            chunks.append(positions)
            pos = int(positions[-1])
        idx = np.concatenate(chunks)
        idx = idx[idx < total]
    u, v = _pair_from_index(idx)
    return EdgeList(n, np.stack([u, v], axis=1))


def pld_max_degree(n: int, gamma: float) -> int:
    return max(1, int(np.floor(n ** (1.0 / (gamma - 1.0)) + 1e-9)))


def draw_pld(n: int, gamma: float, rng) -> np.ndarray:
    """``n`` i.i.d. draws with P[X = k] proportional to k^-gamma on [1, max degree]."""
    if gamma <= 1.0 or n < 1:
        raise ValueError("need gamma > 1 and n >= 1")
    delta = pld_max_degree(n, gamma)
    weights = np.arange(1, delta + 1, dtype=np.float64) ** -gamma
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = rng.generator.random(n)
    return (np.searchsorted(cdf, u, side="right") + 1).clip(1, delta).astype(np.int64)


def sample_pld_degrees(n: int, gamma: float, rng, max_retries: int = 100) -> np.ndarray:
    """Graphical power-law degree sequence; odd sums are fixed by one increment."""
    delta = pld_max_degree(n, gamma)
    for _ in range(max_retries):
        d = draw_pld(n, gamma, rng)
        if d.sum() % 2:
            below = np.flatnonzero(d < delta)
            if below.size == 0:
                continue
            d[below[rng.uniform_index(below.size)]] += 1
        if is_graphical(d):
            return d
    raise RetriesExhausted(f"no graphical sequence after {max_retries} draws (n={n}, gamma={gamma})")


# ---------------------------------------------------------------------------
# text edge lists


def read_edge_list(path: str | os.PathLike, sanitize: bool = False) -> EdgeList:
    """Read whitespace-separated node pairs; ``#`` lines are comments.

    A ``# nodes N`` comment fixes the node count.  Without ``sanitize`` loops
    and duplicate edges are errors; with it they are dropped.
    """
    n_header = None
    body = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                parts = s[1:].split()
                if len(parts) == 2 and parts[0] == "nodes":
                    n_header = int(parts[1])
                continue
            body.append(s)
    try:
        flat = np.array(" ".join(body).split(), dtype=np.int64)
    except ValueError as exc:
        raise InvalidGraph(f"{path}: non-integer token") from exc
    if flat.size % 2:
        raise InvalidGraph(f"{path}: odd number of node ids")
    pairs = flat.reshape(-1, 2)
    if pairs.size and pairs.min() < 0:
        raise InvalidGraph(f"{path}: negative node id")
    if pairs.size and pairs.max() >= MAX_NODES:
        raise InvalidGraph(f"{path}: node id exceeds 2^{NODE_BITS} - 1")
    n = n_header if n_header is not None else (int(pairs.max()) + 1 if pairs.size else 0)
    pairs = np.sort(pairs, axis=1)
    loops = pairs[:, 0] == pairs[:, 1]
    if sanitize:
        pairs = pairs[~loops]
        words = np.unique(pack(pairs[:, 0], pairs[:, 1]))
        u, v = unpack(words)
        pairs = np.stack([u, v], axis=1)
    else:
        if loops.any():
            raise InvalidGraph(f"{path}: contains self-loops (use sanitize)")
        words = pack(pairs[:, 0], pairs[:, 1])
        if len(np.unique(words)) != len(words):
            raise InvalidGraph(f"{path}: contains duplicate edges (use sanitize)")
    return EdgeList(n, pairs)


def write_edge_list(path: str | os.PathLike, g: EdgeList) -> None:
    with open(path, "w") as fh:
        fh.write(f"# nodes {g.n}\n")
        if g.m:
            np.savetxt(fh, g.edges, fmt="%d")
