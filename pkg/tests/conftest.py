import numpy as np
import pytest

from eulersparse.graph_core import build_graph


def cycle(n, w=1.0):
    return build_graph(n, [(i, (i + 1) % n, w) for i in range(n)])


def path(k, w=1.0):
    """Unit path with ``k`` edges, oriented left to right."""
    return build_graph(k + 1, [(i, i + 1, w) for i in range(k)])


def complete_bidirected(n, w=1.0):
    return build_graph(n, [(i, j, w) for i in range(n) for j in range(n) if i != j])


def random_connected(n, m, seed, U=1):
    """Random tree plus extra random edges, integer weights in [1, U]."""
    rng = np.random.default_rng(seed)
    edges = {}
    perm = rng.permutation(n)
    for i in range(1, n):
        u, v = perm[i], perm[rng.integers(0, i)]
        edges[(int(u), int(v))] = int(rng.integers(1, U + 1))
    while len(edges) < m:
        u, v = rng.integers(0, n, size=2)
        if u != v and (u, v) not in edges and (v, u) not in edges:
            edges[(int(u), int(v))] = int(rng.integers(1, U + 1))
    return build_graph(n, [(u, v, w) for (u, v), w in edges.items()])


@pytest.fixture
def triangle():
    return cycle(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
