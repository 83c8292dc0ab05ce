"""Autocorrelation-based mixing diagnostic.

Each tracked edge yields a binary existence series, one entry per superstep.
For every thinning value ``k`` the series restricted to supersteps divisible by
``k`` is summarized by its 2x2 transition counts.  An edge counts as
independent at ``k`` when a first-order Markov model does not beat the
independence model under BIC, which for these two nested models reduces to
``G^2 <= ln N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import DEFAULT_PL
from .errors import InsufficientData
from .graph import EdgeList, havel_hakimi, sample_pld_degrees
from .parallel import make_chain
from .report import read_rows, write_rows
from .rng import RandomStream

DEFAULT_SCHEDULE = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32)
MIN_TRANSITIONS = 8
REPORT_FIELDS = ("k", "mean_fraction_non_independent", "stddev", "runs", "edges_tracked", "edges_insufficient")


class ThinningSchedule(tuple):
    """Sorted, distinct, positive thinning values."""

    def __new__(cls, values=DEFAULT_SCHEDULE):
        vals = sorted({int(v) for v in values})
        if not vals or vals[0] < 1:
            raise ValueError("thinning values must be positive integers")
        return super().__new__(cls, vals)

    @classmethod
    def parse(cls, text: str) -> "ThinningSchedule":
        return cls(int(x) for x in text.split(",") if x.strip())


class EdgeTimeSeriesCounters:
    """Streaming transition counts for every (tracked edge, k).

    ``counts[e, i]`` holds ``(n00, n01, n10, n11)`` for edge ``e`` at
    ``schedule[i]``; index ``2 * previous + current``.
    """

    def __init__(self, tracked_words, schedule=DEFAULT_SCHEDULE):
        self.tracked = np.asarray(tracked_words, dtype=np.uint64)
        self.schedule = ThinningSchedule(schedule)
        e, s = len(self.tracked), len(self.schedule)
        self.counts = np.zeros((e, s, 4), dtype=np.int64)
        self.last = np.zeros((e, s), dtype=np.int8)
        self.observations = np.zeros(s, dtype=np.int64)

    def fold(self, t: int, present) -> None:
        """Record the existence bits observed after superstep ``t`` (1-based)."""
        present = np.asarray(present, dtype=np.int8)
        rows = np.arange(len(self.tracked))
        for i, k in enumerate(self.schedule):
            if t % k:
                continue
            if self.observations[i]:
                self.counts[rows, i, 2 * self.last[:, i] + present] += 1
            self.last[:, i] = present
            self.observations[i] += 1

    def observe(self, t: int, current_words) -> None:
        self.fold(t, np.isin(self.tracked, current_words))

    def transitions(self) -> np.ndarray:
        return self.counts.sum(axis=2)

    def fraction_non_independent(self, min_samples: int = MIN_TRANSITIONS):
        """Per k: (fraction of decidable edges that are non-independent, insufficient count)."""
        out = []
        for i in range(len(self.schedule)):
            c = self.counts[:, i, :]
            n = c.sum(axis=1)
            ok = n >= min_samples
            if not ok.any():
                out.append((math.nan, int((~ok).sum())))
                continue
            g2 = g2_statistic(c[ok])
            dependent = g2 > np.log(n[ok])
            out.append((float(dependent.mean()), int((~ok).sum())))
        return out


def g2_statistic(counts) -> np.ndarray | float:
    """Likelihood-ratio statistic of 2x2 transition counts ``(n00, n01, n10, n11)``.

    Works on a single count vector or on an array of shape ``(..., 4)``.
    """
    c = np.asarray(counts, dtype=np.float64)
    scalar = c.ndim == 1
    c = c.reshape(-1, 2, 2)
    total = c.sum(axis=(1, 2))
    if np.any(total < 1):
        raise ValueError("need at least one transition")
    rows = c.sum(axis=2, keepdims=True)
    cols = c.sum(axis=1, keepdims=True)
    expected = rows * cols / total[:, None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(c > 0, c * np.log(c / expected), 0.0)
    g2 = np.maximum(2.0 * terms.sum(axis=(1, 2)), 0.0)
    return float(g2[0]) if scalar else g2


def is_independent(counts, min_samples: int = MIN_TRANSITIONS) -> bool:
    n = int(np.sum(counts))
    if n < min_samples:
        raise InsufficientData(f"{n} transitions, need at least {min_samples}")
    return g2_statistic(counts) <= math.log(n)


def track_run(g0: EdgeList, chain, supersteps: int, schedule=DEFAULT_SCHEDULE, tracked=None, seed=None,
              threads: int = 1, p_l: float = DEFAULT_PL) -> EdgeTimeSeriesCounters:
    """Run a chain for ``supersteps`` and stream the existence series of ``tracked`` edges.

    ``chain`` is an algorithm name or any object with ``superstep()`` and
    ``canonical_words()``.  Tracked edges default to the edges of ``g0``.
    """
    if supersteps < 0:
        raise ValueError("supersteps must be non-negative")
    if tracked is None:
        tracked = np.unique(g0.canonical_words())
    elif isinstance(tracked, EdgeList):
        tracked = np.unique(tracked.canonical_words())
    counters = EdgeTimeSeriesCounters(tracked, schedule)
    owned = isinstance(chain, str)
    if owned:
        chain = make_chain(chain, g0, seed=seed, threads=threads, p_l=p_l)
    try:
        for t in range(1, supersteps + 1):
            chain.superstep()
            counters.observe(t, chain.canonical_words())
    finally:
        if owned:
            chain.close()
    return counters


def all_pairs_words(n: int) -> np.ndarray:
    """Every node pair of an ``n``-node graph, packed canonically."""
    if n > 512:
        raise ValueError("tracking all pairs is limited to n <= 512")
    u, v = np.triu_indices(n, k=1)
    return (u.astype(np.uint64) << np.uint64(28)) | v.astype(np.uint64)


@dataclass
class MixingReport:
    algo: str
    seed: int
    supersteps: int
    schedule: tuple
    rows: list = field(default_factory=list)

    def fraction(self, k: int) -> float:
        return next(r["mean_fraction_non_independent"] for r in self.rows if r["k"] == k)

    def stddev(self, k: int) -> float:
        return next(r["stddev"] for r in self.rows if r["k"] == k)

    def write_csv(self, path) -> None:
        write_rows(path, self.rows, REPORT_FIELDS)

    @classmethod
    def read_csv(cls, path, algo: str = "", seed: int = 0, supersteps: int = 0) -> "MixingReport":
        rows = read_rows(path)
        return cls(algo, seed, supersteps, tuple(r["k"] for r in rows), rows)


def pld_instance(n: int = 128, gamma: float = 2.5):
    """Factory for power-law instances: ``stream -> EdgeList``."""

    def make(stream: RandomStream) -> EdgeList:
        return havel_hakimi(sample_pld_degrees(n, gamma, stream))

    return make


def summarize(algo, seed, supersteps, schedule, per_run) -> MixingReport:
    """Fold per-run ``(fractions, insufficient, tracked)`` results into a report."""
    schedule = ThinningSchedule(schedule)
    rows = []
    for i, k in enumerate(schedule):
        fr = np.array([r[0][i][0] for r in per_run], dtype=np.float64)
        fr = fr[~np.isnan(fr)]
        rows.append({
            "k": k,
            "mean_fraction_non_independent": float(fr.mean()) if len(fr) else math.nan,
            "stddev": float(fr.std(ddof=1)) if len(fr) > 1 else 0.0,
            "runs": len(per_run),
            "edges_tracked": int(sum(r[2] for r in per_run)),
            "edges_insufficient": int(sum(r[0][i][1] for r in per_run)),
        })
    return MixingReport(algo, seed, supersteps, tuple(schedule), rows)


def compare_chains(instance, runs: int, supersteps: int, schedule=DEFAULT_SCHEDULE, seed: int = 0,
                   algos=("es", "global-es"), p_l: float = DEFAULT_PL, track_all: bool = False) -> dict:
    """Paired mixing runs: run ``r`` of every algorithm starts from the same graph.

    ``instance`` is an :class:`EdgeList` or a factory ``stream -> EdgeList``.
    Returns a :class:`MixingReport` per algorithm.
    """
    master = RandomStream(seed)
    per_algo = {a: [] for a in algos}
    for r in range(runs):
        g0 = instance(master.substream(r, 0)) if callable(instance) else instance
        tracked = all_pairs_words(g0.n) if track_all else None
        for ai, algo in enumerate(algos):
            run_seed = int(master.substream(r, 1 + ai).generator.integers(0, 2**63))
            c = track_run(g0, algo, supersteps, schedule, tracked=tracked, seed=run_seed, p_l=p_l)
            per_algo[algo].append((c.fraction_non_independent(), None, len(c.tracked)))
    return {a: summarize(a, seed, supersteps, schedule, per_algo[a]) for a in algos}
