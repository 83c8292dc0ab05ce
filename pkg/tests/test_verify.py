from itertools import combinations

import numpy as np
import pytest

from edgeswitch.errors import TooLarge, UnknownState
from edgeswitch.graph import is_graphical
from edgeswitch.verify import (
    chi_square_uniformity,
    enumerate_graphs,
    exact_es_transition_counts,
    histogram_rows,
    sample_distribution,
    transition_graph_strongly_connected,
)


def brute_force_count(d):
    n = len(d)
    pairs = list(combinations(range(n), 2))
    hits = 0
    for mask in range(1 << len(pairs)):
        deg = [0] * n
        for b, (u, v) in enumerate(pairs):
            if mask >> b & 1:
                deg[u] += 1
                deg[v] += 1
        hits += deg == list(d)
    return hits


SMALL = [(2, 2, 2), (1, 1, 1, 1), (2, 2, 2, 2, 2), (1, 1, 2, 2), (3, 3, 2, 2, 2), (1, 1, 1, 1, 1, 1),
         (3, 2, 2, 2, 1), (2, 2, 2, 2, 2, 2), (3, 3, 3, 3), (4, 3, 3, 2, 2, 2), (0, 1, 1), (3, 1, 1, 1)]


@pytest.mark.parametrize("d", SMALL)
def test_enumeration_matches_unpruned_filter(d):
    space = enumerate_graphs(d)
    assert len(space) == brute_force_count(d)
    assert len(set(space.keys)) == len(space)


def test_enumeration_examples():
    assert len(enumerate_graphs((2, 2, 2))) == 1
    assert len(enumerate_graphs((1, 1, 1, 1))) == 3
    assert len(enumerate_graphs((2, 2, 2, 2, 2))) == 12
    assert len(enumerate_graphs((3, 1, 1))) == 0
    with pytest.raises(TooLarge):
        enumerate_graphs((1,) * 10)


def test_triangle_rejects_everything():
    (tri,) = enumerate_graphs((2, 2, 2))
    assert exact_es_transition_counts(tri) == {tri: 12}


def test_matching_moves_are_balanced():
    counts = exact_es_transition_counts(((0, 1), (2, 3)))
    a, b = counts[((0, 2), (1, 3))], counts[((0, 3), (1, 2))]
    assert a == b > 0
    assert sum(counts.values()) == 4


@pytest.mark.parametrize("d", [d for d in SMALL if len(d) <= 6 and is_graphical(d)])
def test_transition_counts_symmetric(d):
    space = enumerate_graphs(d)
    m = sum(d) // 2
    table = {k: exact_es_transition_counts(k, len(d)) for k in space}
    for a, succ in table.items():
        assert sum(succ.values()) == 2 * m * (m - 1)
        for b, c in succ.items():
            assert b in space
            assert table[b].get(a, 0) == c


@pytest.mark.parametrize("d", [d for d in SMALL if is_graphical(d)])
def test_irreducible(d):
    assert transition_graph_strongly_connected(enumerate_graphs(d))


def test_sample_distribution_trivial_cases():
    assert sample_distribution("es", (1, 1, 1, 1), 5, 0, seed=1) == {}
    (tri,) = enumerate_graphs((2, 2, 2))
    assert sample_distribution("global-es", (2, 2, 2), 5, 100, seed=1) == {tri: 100}


def test_chi_square_examples():
    space = enumerate_graphs((2, 2, 2, 2, 2))
    keys = list(space)
    uniform = chi_square_uniformity({k: 100 for k in keys}, space)
    assert uniform.statistic == 0 and uniform.dof == 11 and uniform.passed
    assert uniform.critical == pytest.approx(31.26, abs=0.01)
    n = 1200
    res = chi_square_uniformity({keys[0]: n}, space)
    assert res.statistic == pytest.approx(11 * n / 12 + (n - n / 12) ** 2 / (n / 12))
    assert not res.passed
    with pytest.raises(UnknownState):
        chi_square_uniformity({((0, 9),): 1000}, space)
    with pytest.raises(ValueError):
        chi_square_uniformity({keys[0]: 5}, space)


def test_chi_square_calibration():
    space = enumerate_graphs((2, 2, 2, 2, 2))
    keys = list(space)
    rng = np.random.default_rng(7)
    draws = rng.multinomial(12000, [1 / 12] * 12, size=1000)
    passed = sum(chi_square_uniformity(dict(zip(keys, row)), space).passed for row in draws)
    assert passed >= 990


@pytest.mark.parametrize("algo", ["es", "global-es", "eager-es", "steady-global-es"])
@pytest.mark.parametrize("d", [(2, 2, 2, 2, 2), (1, 1, 1, 1), (3, 2, 2, 2, 1)])
def test_chains_sample_uniformly(algo, d):
    space = enumerate_graphs(d)
    hist = sample_distribution(algo, d, 20, 40 * len(space) * 10, seed=11, space=space)
    res = chi_square_uniformity(hist, space)
    assert res.passed, res


def test_steady_histogram_independent_of_threads():
    d = (2, 2, 2, 2, 2)
    one = sample_distribution("steady-global-es", d, 10, 4000, seed=3, threads=1)
    four = sample_distribution("steady-global-es", d, 10, 4000, seed=3, threads=4)
    assert one == four
    assert one == sample_distribution("global-es", d, 10, 4000, seed=3)


def test_eager_sampling_needs_one_thread():
    with pytest.raises(ValueError):
        sample_distribution("eager-es", (1, 1, 1, 1), 1, 10, seed=1, threads=2)


def test_histogram_rows():
    space = enumerate_graphs((1, 1, 1, 1))
    rows = histogram_rows({space.keys[0]: 4}, space)
    assert rows[0] == {"state": "0-1 2-3", "count": 4} and rows[1]["count"] == 0
