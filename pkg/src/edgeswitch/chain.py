"""Sequential ES-MC and G-ES-MC.

:class:`ChainState` keeps the edge array and a :class:`SequentialEdgeSet`
mirror of it.  These implementations define the reference semantics that the
parallel algorithms are checked against.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from numba import njit

from .edgeset import SequentialEdgeSet, seq_erase, seq_find, seq_insert, table_capacity
from .errors import InvariantViolation
from .graph import EdgeList, canonical_words, degree_sequence_of, nb_canon, nb_pack, nb_split
from .rng import GlobalSwitch, RandomStream, RandomSwitchSource, SwitchSource

DEFAULT_PL = 0.01


class SwitchOutcome(IntEnum):
    ACCEPTED = 0
    REJECTED_LOOP = 1
    REJECTED_EXISTING = 2


_ACCEPTED, _LOOP, _EXISTING = 0, 1, 2


@dataclass(frozen=True)
class SwitchDescriptor:
    i: int
    j: int
    g: int


@dataclass
class SuperstepRecord:
    superstep: int
    accepted: int
    rejected_loop: int
    rejected_existing: int
    seconds: float = 0.0
    rounds: int | None = None

    FIELDS = ("superstep", "accepted", "rejected_loop", "rejected_existing", "rounds", "seconds")

    def row(self) -> dict:
        return {f: getattr(self, f) for f in self.FIELDS}


@njit(nogil=True, inline="always")
def switch_targets(e1, e2, g):
    """Directed targets of rewiring stored edges ``e1``, ``e2``."""
    a, b = nb_split(e1)
    x, y = nb_split(e2)
    if g == 0:
        return a, x, b, y
    return a, y, b, x


@njit(nogil=True)
def apply_switch_kernel(edges, buckets, i, j, g):
    p, q, r, s = switch_targets(edges[i], edges[j], g)
    if p == q or r == s:
        return _LOOP
    k3 = nb_canon(p, q)
    k4 = nb_canon(r, s)
    if seq_find(buckets, k3) >= 0 or seq_find(buckets, k4) >= 0:
        return _EXISTING
    a, b = nb_split(edges[i])
    x, y = nb_split(edges[j])
    seq_erase(buckets, nb_canon(a, b))
    seq_erase(buckets, nb_canon(x, y))
    seq_insert(buckets, k3)
    seq_insert(buckets, k4)
    edges[i] = nb_pack(p, q)
    edges[j] = nb_pack(r, s)
    return _ACCEPTED


@njit(nogil=True, cache=True)
def _run_es_kernel(edges, buckets, ii, jj, gg, counts):
    for t in range(ii.shape[0]):
        counts[apply_switch_kernel(edges, buckets, ii[t], jj[t], gg[t])] += 1


@njit(nogil=True, cache=True)
def _global_kernel(edges, buckets, ell, gg, outcomes):
    for k in range(ell):
        outcomes[k] = apply_switch_kernel(edges, buckets, 2 * k, 2 * k + 1, gg[k])


@njit(nogil=True, cache=True)
def _apply_one(edges, buckets, i, j, g):
    return apply_switch_kernel(edges, buckets, i, j, g)


@dataclass
class ChainState:
    """Edge array plus hash-set mirror, with switch counters."""

    n: int
    edges: np.ndarray  # packed uint64, stored orientation
    edge_set: SequentialEdgeSet
    p_l: float = DEFAULT_PL
    accepted: int = 0
    rejected_loop: int = 0
    rejected_existing: int = 0
    supersteps: int = 0
    records: list = field(default_factory=list)

    @classmethod
    def from_graph(cls, g: EdgeList, p_l: float = DEFAULT_PL) -> "ChainState":
        if not g.is_simple():
            raise InvariantViolation("chain input must be a simple graph")
        if not 0.0 < p_l < 1.0:
            raise ValueError("P_L must lie in (0, 1)")
        words = g.words()
        return cls(g.n, words, SequentialEdgeSet.from_words(canonical_words(words), table_capacity(len(words))), p_l)

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_list(self) -> EdgeList:
        return EdgeList.from_words(self.n, self.edges)

    def canonical_words(self) -> np.ndarray:
        return canonical_words(self.edges)

    def check(self, degrees: np.ndarray | None = None) -> None:
        """Array/set coherence, simplicity and (optionally) degree preservation."""
        g = self.edge_list()
        if not g.is_simple():
            raise InvariantViolation("graph is not simple")
        if not np.array_equal(np.sort(self.canonical_words()), self.edge_set.words()):
            raise InvariantViolation("edge array and hash set disagree")
        if degrees is not None and not np.array_equal(degree_sequence_of(g), degrees):
            raise InvariantViolation("degree sequence changed")

    def _count(self, counts):
        self.accepted += int(counts[0])
        self.rejected_loop += int(counts[1])
        self.rejected_existing += int(counts[2])


def apply_switch(state: ChainState, sigma: SwitchDescriptor) -> SwitchOutcome:
    if sigma.i == sigma.j or not (0 <= sigma.i < state.m and 0 <= sigma.j < state.m):
        raise ValueError("invalid switch descriptor")
    out = SwitchOutcome(_apply_one(state.edges, state.edge_set.buckets, sigma.i, sigma.j, sigma.g))
    counts = np.zeros(3, np.int64)
    counts[out] += 1
    state._count(counts)
    return out


def _source(source, seed):
    if source is not None:
        return source
    return RandomSwitchSource(RandomStream(seed))


def run_es(state: ChainState, num_switches: int, source: SwitchSource) -> np.ndarray:
    """Apply ``num_switches`` descriptors drawn from ``source``; returns outcome counts."""
    counts = np.zeros(3, np.int64)
    if num_switches <= 0 or state.m < 2:
        return counts
    remaining = num_switches
    while remaining:
        chunk = min(remaining, 1 << 20)
        i, j, g = source.es_switches(state.m, chunk)
        _run_es_kernel(state.edges, state.edge_set.buckets, i, j, g, counts)
        remaining -= chunk
    state._count(counts)
    return counts


def es_superstep_size(m: int) -> int:
    return math.ceil(m / 2)


def run_es_supersteps(state: ChainState, supersteps: int, source: SwitchSource | None = None, seed=None):
    """ES-MC in supersteps of ceil(m/2) attempts, recording per-superstep counters."""
    source = _source(source, seed)
    for _ in range(supersteps):
        t0 = time.perf_counter()
        c = run_es(state, es_superstep_size(state.m), source)
        state.supersteps += 1
        state.records.append(SuperstepRecord(state.supersteps, *map(int, c), time.perf_counter() - t0))
    return state


def apply_global_switch(state: ChainState, gs: GlobalSwitch) -> np.ndarray:
    """Execute one global switch in index order; returns per-switch outcomes."""
    if len(gs.perm) != state.m:
        raise ValueError("permutation length differs from m")
    state.edges[:] = state.edges[gs.perm]
    outcomes = np.empty(gs.ell, dtype=np.int8)
    _global_kernel(state.edges, state.edge_set.buckets, gs.ell, gs.g, outcomes)
    state._count(np.bincount(outcomes, minlength=3))
    return outcomes


def run_global_es(state: ChainState, supersteps: int, source: SwitchSource | None = None, seed=None):
    """G-ES-MC: one global switch per superstep."""
    source = _source(source, seed)
    for _ in range(supersteps):
        t0 = time.perf_counter()
        gs = source.global_switch(state.m, state.p_l)
        c = np.bincount(apply_global_switch(state, gs), minlength=3)
        state.supersteps += 1
        state.records.append(SuperstepRecord(state.supersteps, *map(int, c), time.perf_counter() - t0))
    return state


def inverse_global_switch(gs: GlobalSwitch, outcomes) -> GlobalSwitch:
    """Global switch that undoes ``gs`` when applied to its resulting array.

    Switch ``k`` is undone by slot pair ``ell-1-k`` of the inverse.  Accepted
    switches are reversed with direction 0, which requires swapping the two
    slots when the forward direction was 1; rejected ones are repeated as is.
    """
    outcomes = np.asarray(outcomes)
    ell = gs.ell
    if len(outcomes) != ell:
        raise ValueError("need one outcome per switch")
    perm = np.arange(len(gs.perm), dtype=np.int64)
    g = np.empty(ell, dtype=np.uint8)
    for k in range(ell):
        r = ell - 1 - k
        accepted = outcomes[k] == SwitchOutcome.ACCEPTED
        if accepted and gs.g[k] == 1:
            perm[2 * r], perm[2 * r + 1] = 2 * k + 1, 2 * k
        else:
            perm[2 * r], perm[2 * r + 1] = 2 * k, 2 * k + 1
        g[r] = 0 if accepted else gs.g[k]
    return GlobalSwitch(perm, ell, g)
