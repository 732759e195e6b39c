import random

import pytest

from eonsim.topology import Link, NetworkGraph, Node


def make_graph(n, edges, lengths=None, populations=None):
    """Small graph from an edge list; lengths default to 100 km."""
    nodes = [Node(i, chr(ord("A") + i) if i < 26 else str(i),
                  populations[i] if populations else 1000) for i in range(n)]
    links = [Link(i, a, b, float(lengths[i] if lengths else 100.0))
             for i, (a, b) in enumerate(edges)]
    return NetworkGraph(nodes, links)


def random_graph(rng: random.Random, max_nodes=8, integer_lengths=True):
    n = rng.randint(3, max_nodes)
    # spanning tree first so the graph is connected
    edges = {(rng.randrange(i), i) for i in range(1, n)}
    for _ in range(rng.randint(0, n * (n - 1) // 2)):
        a, b = rng.sample(range(n), 2)
        if (a, b) not in edges and (b, a) not in edges:
            edges.add((a, b))
    edges = sorted(edges)
    lengths = [rng.randint(1, 5) * 100 if integer_lengths else rng.uniform(50, 900)
               for _ in edges]
    return make_graph(n, edges, lengths)


@pytest.fixture
def line3():
    # A-B-C, 80 km links
    return make_graph(3, [(0, 1), (1, 2)], [80, 80])


@pytest.fixture
def cycle4():
    # A-B-C-D-A, 100 km links
    return make_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


@pytest.fixture(scope="session")
def usanet():
    from eonsim.topology import load_topology
    return load_topology("usanet")


@pytest.fixture(scope="session")
def usanet_paths(usanet):
    from eonsim.topology import PathCache
    pc = PathCache(usanet, 30)
    pc.precompute()
    return pc


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(mod.RESULTS.items()):
        terminalreporter.write_line(f"criterion {n}: {mod.status(ok)}: {detail}")
