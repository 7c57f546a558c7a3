import numpy as np
import pytest

from wgmrf.mesh import MeshGraph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lattice_14():
    return MeshGraph.lattice(14, 14)


def random_connected_graph(rng, m, extra):
    """Random spanning tree plus ``extra`` random chords."""
    edges = [(int(rng.integers(0, i)), i) for i in range(1, m)]
    for _ in range(extra):
        i, j = rng.integers(0, m, size=2)
        if i != j:
            edges.append((int(i), int(j)))
    return MeshGraph.from_edges(m, sorted({(min(a, b), max(a, b)) for a, b in edges}))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
