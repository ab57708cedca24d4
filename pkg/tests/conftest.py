import itertools

import numpy as np
import pytest

from canoncount.graph import Graph, enumerate_queries


def complete(n):
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def path(n):
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle(n):
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def star(center, leaves):
    n = 1 + len(leaves)
    return Graph(n, tuple((center, leaf) for leaf in leaves))


K33 = Graph(6, tuple((a, b) for a in range(3) for b in range(3, 6)))
PRISM = Graph(6, ((0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)))
TRIANGLE = complete(3)
P3 = path(3)


def random_graph(rng, n, density):
    edges = tuple(e for e in itertools.combinations(range(n), 2) if rng.random() < density)
    return Graph(n, edges)


@pytest.fixture(scope="session")
def standard_queries():
    return enumerate_queries(3, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting ---------------------------------------------------------

ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail):
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def desk_run():
    """Full desk-scale run with default settings (a few minutes)."""
    from canoncount.pipeline import run_desk

    return run_desk()
