import sys

import numpy as np
import pytest
from hypothesis import settings

from edgeswitch.graph import EdgeList, degree_sequence_of, gen_gnp, havel_hakimi, sample_pld_degrees
from edgeswitch.rng import RandomStream

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

FIG1 = EdgeList.from_pairs([(0, 1), (2, 3), (0, 2)])


def random_graph(seed: int, max_nodes: int = 64) -> EdgeList:
    """Small simple graph: alternately G(n,p) and a Havel-Hakimi power-law graph."""
    s = RandomStream(seed)
    n = int(s.generator.integers(6, max_nodes + 1))
    if seed % 2:
        return gen_gnp(n, float(s.generator.uniform(0.1, 0.6)), s)
    return havel_hakimi(sample_pld_degrees(n, float(s.generator.uniform(2.0, 3.0)), s))


def assert_valid(g: EdgeList, degrees):
    assert g.is_simple()
    assert np.array_equal(degree_sequence_of(g), degrees)


@pytest.fixture
def fig1():
    return FIG1


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
