from itertools import permutations

import numpy as np
import pytest
from scipy.stats import chi2, chi2_contingency

from edgeswitch.rng import (
    GlobalSwitch,
    RandomStream,
    RandomSwitchSource,
    RecordingSwitchSource,
    ReplaySwitchSource,
    batch_permutations,
    binomial,
    parallel_shuffle,
    shuffle,
    uniform_index,
)


def _order_counts(draw, runs):
    index = {p: i for i, p in enumerate(permutations(range(3)))}
    counts = np.zeros(6)
    for _ in range(runs):
        counts[index[tuple(draw())]] += 1
    return counts


def test_same_seed_same_stream():
    a, b = RandomStream(42), RandomStream(42)
    assert np.array_equal(a.generator.integers(0, 2**63, 100), b.generator.integers(0, 2**63, 100))
    assert RandomStream().seed != RandomStream().seed


def test_substreams_distinct_and_reproducible():
    s = RandomStream(7)
    x = s.substream(1).generator.integers(0, 2**63, 10)
    y = s.substream(2).generator.integers(0, 2**63, 10)
    assert not np.array_equal(x, y)
    assert np.array_equal(x, RandomStream(7).substream(1).generator.integers(0, 2**63, 10))


def test_uniform_index_examples():
    s = RandomStream(1)
    assert all(uniform_index(s, 1) == 0 for _ in range(100))
    draws = s.generator.integers(0, 6, 600_000)
    counts = np.bincount(draws, minlength=6)
    assert np.all(np.abs(counts - 100_000) <= 4 * np.sqrt(600_000 * (1 / 6) * (5 / 6)))
    assert all(uniform_index(s, 2**40) < 2**40 for _ in range(1000))
    with pytest.raises(ValueError):
        uniform_index(s, 0)


def test_uniform_index_no_modulo_bias():
    s = RandomStream(2)
    draws = np.array([uniform_index(s, 3) for _ in range(100_000)] + list(s.generator.integers(0, 3, 900_000)))
    counts = np.bincount(draws, minlength=3)
    stat = ((counts - len(draws) / 3) ** 2 / (len(draws) / 3)).sum()
    assert stat < chi2.ppf(0.999, 2)


def test_binomial_examples():
    s = RandomStream(3)
    assert binomial(s, 0, 0.3) == 0
    assert binomial(s, 5, 1.0) == 5
    samples = np.array([binomial(s, 10**6, 0.5) for _ in range(100)])
    assert abs(samples.mean() - 5e5) <= 4 * np.sqrt(10**6 * 0.25) / 10


def test_binomial_matches_bernoulli_sum():
    s = RandomStream(4)
    ours = np.array([binomial(s, 20, 0.3) for _ in range(10_000)])
    oracle = (s.generator.random((10_000, 20)) < 0.3).sum(axis=1)
    support = np.arange(21)
    table = np.array([[np.sum(ours == k) for k in support], [np.sum(oracle == k) for k in support]])
    table = table[:, table.sum(axis=0) >= 10]
    _, p, _, _ = chi2_contingency(table)
    assert p > 0.001


def test_shuffle_examples():
    s = RandomStream(5)
    assert len(shuffle([], s)) == 0
    assert shuffle([9], s).tolist() == [9]
    counts = _order_counts(lambda: shuffle([0, 1, 2], s), 60_000)
    assert np.all(np.abs(counts - 10_000) <= 4 * np.sqrt(60_000 * (1 / 6) * (5 / 6)))


def test_parallel_shuffle_p1_equals_shuffle():
    a = np.arange(1000)
    assert np.array_equal(parallel_shuffle(a, RandomStream(9), 1), shuffle(a, RandomStream(9)))


def test_parallel_shuffle_uniform_p2():
    s = RandomStream(6)
    counts = _order_counts(lambda: parallel_shuffle([0, 1, 2], s, 2), 60_000)
    assert np.all(np.abs(counts - 10_000) <= 4 * np.sqrt(60_000 * (1 / 6) * (5 / 6)))


def test_parallel_shuffle_permutation_and_worker_independent():
    a = np.arange(10**7, dtype=np.int64)
    out = parallel_shuffle(a, RandomStream(8), 8, workers=4)
    assert np.array_equal(np.sort(out), a)
    small = np.arange(5000)
    assert np.array_equal(parallel_shuffle(small, RandomStream(1), 8, workers=1),
                          parallel_shuffle(small, RandomStream(1), 8, workers=8))


def test_batch_permutations_are_uniform():
    perms = batch_permutations(RandomStream(3), 60_000, 3)
    index = {p: i for i, p in enumerate(permutations(range(3)))}
    counts = np.bincount([index[tuple(r)] for r in perms.tolist()], minlength=6)
    assert np.all(np.abs(counts - 10_000) <= 4 * np.sqrt(60_000 * (1 / 6) * (5 / 6)))


def test_es_switch_draws():
    i, j, g = RandomSwitchSource(RandomStream(1)).es_switches(5, 200_000)
    assert np.all(i != j) and set(np.unique(g)) == {0, 1}
    pairs = np.bincount(i * 5 + j, minlength=25).reshape(5, 5)
    off = pairs[~np.eye(5, dtype=bool)]
    assert np.all(np.abs(off - 10_000) <= 4 * np.sqrt(200_000 / 20))


def test_global_switch_draws():
    gs = RandomSwitchSource(RandomStream(2)).global_switch(101, 0.01)
    assert np.array_equal(np.sort(gs.perm), np.arange(101))
    assert 0 <= gs.ell <= 50 and len(gs.g) == gs.ell
    with pytest.raises(ValueError):
        GlobalSwitch(np.arange(4), 3, [0, 0, 0])


def test_recording_replays_bit_identically():
    rec = RecordingSwitchSource(RandomSwitchSource(RandomStream(3)))
    first = [rec.es_switches(10, 7), rec.es_switches(10, 3)]
    gs = rec.global_switch(10, 0.2)
    rep = rec.replay()
    again = rep.es_switches(10, 10)
    assert np.array_equal(again[0], np.concatenate([first[0][0], first[1][0]]))
    g2 = rep.global_switch(10, 0.2)
    assert np.array_equal(g2.perm, gs.perm) and g2.ell == gs.ell and np.array_equal(g2.g, gs.g)
    with pytest.raises(IndexError):
        rep.es_switches(10, 1)
    with pytest.raises(ValueError):
        ReplaySwitchSource([1], [1], [0])
