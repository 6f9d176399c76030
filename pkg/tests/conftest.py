import numpy as np
import pytest

from p2pshare.netgen import Graph


@pytest.fixture
def toy():
    """Four nodes with degrees (3, 2, 2, 1): A=0, B=1, C=2, D=3."""
    return Graph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)])


@pytest.fixture
def cycle4():
    """A-B-C-D-A."""
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def star5():
    return Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


def complete(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def random_graph(rng, n, p):
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return Graph.from_edges(n, np.column_stack([iu[0][keep], iu[1][keep]]))


_ACCEPTANCE_LINES: list[str] = []


def acceptance_report(number, name, ok, detail=""):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    _ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
