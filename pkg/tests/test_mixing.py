import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph
from edgeswitch.errors import InsufficientData
from edgeswitch.graph import EdgeList
from edgeswitch.mixing import (
    DEFAULT_SCHEDULE,
    EdgeTimeSeriesCounters,
    MixingReport,
    ThinningSchedule,
    all_pairs_words,
    compare_chains,
    g2_statistic,
    is_independent,
    pld_instance,
    track_run,
)

N00, N01, N10, N11 = range(4)


class FrozenChain:
    def __init__(self, g):
        self.words = g.canonical_words()

    def superstep(self):
        pass

    def canonical_words(self):
        return self.words


class TogglingChain:
    """The first edge disappears and reappears on alternate supersteps."""

    def __init__(self, g):
        self.full = g.canonical_words()
        self.present = True

    def superstep(self):
        self.present = not self.present

    def canonical_words(self):
        return self.full if self.present else self.full[1:]


def g2_reference(counts):
    n = [mpmath.mpf(c) for c in counts]
    total = sum(n)
    rows = [n[0] + n[1], n[2] + n[3]]
    cols = [n[0] + n[2], n[1] + n[3]]
    s = mpmath.mpf(0)
    for a in range(2):
        for b in range(2):
            c = n[2 * a + b]
            if c > 0:
                s += c * mpmath.log(c / (rows[a] * cols[b] / total))
    return float(2 * s)


SQUARE = EdgeList.from_pairs([(0, 1), (1, 2), (2, 3), (3, 0)])


def test_schedule():
    assert ThinningSchedule((4, 1, 4, 2)) == (1, 2, 4)
    assert ThinningSchedule.parse("3, 1") == (1, 3)
    with pytest.raises(ValueError):
        ThinningSchedule((0, 1))
    assert ThinningSchedule() == DEFAULT_SCHEDULE


def test_zero_supersteps_leave_counters_empty():
    c = track_run(SQUARE, "es", 0, seed=1)
    assert not c.counts.any() and not c.observations.any()


def test_frozen_chain_counts():
    K = 100
    c = track_run(SQUARE, FrozenChain(SQUARE), K)
    for i, k in enumerate(c.schedule):
        assert (c.counts[:, i, N11] == K // k - 1).all()
        assert not c.counts[:, i, :N11].any()
    for k, (f, short) in zip(c.schedule, c.fraction_non_independent()):
        if K // k - 1 >= 8:
            assert f == 0.0 and short == 0
        else:
            assert math.isnan(f) and short == 4


def test_toggling_chain_counts():
    c = track_run(SQUARE, TogglingChain(SQUARE), 100, schedule=(1, 2))
    toggled = int(np.argmin(np.isin(c.tracked, SQUARE.canonical_words()[1:])))
    row = c.counts[toggled, 0]
    assert row[N00] == row[N11] == 0
    assert row[N01] in (49, 50) and row[N10] == 49
    # at even strides the toggling edge is always present
    assert c.counts[toggled, 1].tolist() == [0, 0, 0, 49]
    assert c.fraction_non_independent()[0][0] == pytest.approx(0.25)


@pytest.mark.parametrize("counts, expected", [((40, 0, 0, 0), 0.0), ((25, 25, 25, 25), 0.0)])
def test_g2_trivial(counts, expected):
    assert g2_statistic(counts) == pytest.approx(expected, abs=1e-12)


def test_g2_alternating_matches_high_precision():
    counts = (0, 50, 49, 0)
    assert g2_statistic(counts) == pytest.approx(g2_reference(counts), rel=1e-12)
    assert g2_statistic(counts) > math.log(99)


counts4 = st.tuples(*[st.integers(0, 500)] * 4).filter(lambda c: sum(c) > 0)


@given(counts4)
def test_g2_matches_reference(c):
    assert g2_statistic(c) == pytest.approx(g2_reference(c), rel=1e-9, abs=1e-9)
    assert g2_statistic(c) >= 0


@given(counts4)
def test_g2_relabel_invariant(c):
    n00, n01, n10, n11 = c
    assert g2_statistic((n11, n10, n01, n00)) == pytest.approx(g2_statistic(c), rel=1e-9, abs=1e-9)


def test_g2_vectorized():
    rows = np.array([[0, 50, 49, 0], [25, 25, 25, 25], [3, 1, 4, 1]])
    assert np.allclose(g2_statistic(rows), [g2_statistic(r) for r in rows])


def test_is_independent():
    assert is_independent((99, 0, 0, 0))
    assert not is_independent((0, 50, 49, 0))
    assert is_independent((25, 25, 25, 25))
    with pytest.raises(InsufficientData):
        is_independent((3, 2, 1, 1))


@given(st.lists(st.lists(st.booleans(), min_size=3, max_size=3), min_size=0, max_size=80),
       st.lists(st.integers(1, 7), min_size=1, max_size=4))
def test_streaming_equals_post_hoc(series, schedule):
    """Counters folded online equal counts taken from the stored series."""
    c = EdgeTimeSeriesCounters(np.arange(3, dtype=np.uint64), schedule)
    for t, bits in enumerate(series, start=1):
        c.fold(t, bits)
    arr = np.array(series, dtype=np.int64).reshape(-1, 3)
    for i, k in enumerate(c.schedule):
        thinned = arr[k - 1::k]
        assert c.observations[i] == len(thinned)
        for e in range(3):
            expected = np.zeros(4, dtype=np.int64)
            for a, b in zip(thinned[:-1, e], thinned[1:, e]):
                expected[2 * a + b] += 1
            assert c.counts[e, i].tolist() == expected.tolist()
            assert c.counts[e, i].sum() == max(len(thinned) - 1, 0)


def test_track_run_real_chain_conserves():
    g = random_graph(3)
    c = track_run(g, "global-es", 64, seed=2)
    for i, k in enumerate(c.schedule):
        assert (c.transitions()[:, i] == 64 // k - 1).all()


def test_all_pairs_words():
    assert len(all_pairs_words(10)) == 45
    with pytest.raises(ValueError):
        all_pairs_words(513)


def test_compare_chains_deterministic_and_csv(tmp_path):
    a = compare_chains(pld_instance(32), 3, 40, (1, 2, 4), seed=5)
    b = compare_chains(pld_instance(32), 3, 40, (1, 2, 4), seed=5)
    assert a["es"].rows == b["es"].rows and a["global-es"].rows == b["global-es"].rows
    path = tmp_path / "mix.csv"
    a["es"].write_csv(path)
    back = MixingReport.read_csv(path)
    assert back.rows == a["es"].rows
    for rep in a.values():
        for r in rep.rows:
            assert 0.0 <= r["mean_fraction_non_independent"] <= 1.0


def test_thinning_reduces_dependence():
    reports = compare_chains(pld_instance(64), 5, 200, (1, 4), seed=2)
    for rep in reports.values():
        assert rep.fraction(1) > rep.fraction(4)
    assert reports["es"].fraction(1) > 0.5
