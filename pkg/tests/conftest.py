import numpy as np
import pytest
from hypothesis import strategies as st

from gnaq.graph import build_graph

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_graph(rng, max_users=8, max_items=8, n_users=None, n_items=None, density=0.4):
    n_users = n_users or int(rng.integers(1, max_users + 1))
    n_items = n_items or int(rng.integers(1, max_items + 1))
    mask = rng.random((n_users, n_items)) < density
    if not mask.any():
        mask[rng.integers(n_users), rng.integers(n_items)] = True
    return build_graph(np.argwhere(mask), n_users, n_items)


def dense_norm_adj(graph):
    """Explicit D^-1/2 A D^-1/2 built from the edge list with Python loops."""
    n = graph.n_nodes
    a = np.zeros((n, n))
    for u, i in graph.edges:
        a[u, graph.n_users + i] = a[graph.n_users + i, u] = 1.0
    deg = a.sum(axis=1)
    out = np.zeros_like(a)
    for r in range(n):
        for c in range(n):
            if a[r, c]:
                out[r, c] = 1.0 / np.sqrt(deg[r] * deg[c])
    return out


def dense_average(graph, h0, n_layers):
    m = dense_norm_adj(graph)
    layers = [h0]
    for _ in range(n_layers):
        layers.append(m @ layers[-1])
    return sum(layers) / (n_layers + 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def graphs(draw, max_users=6, max_items=6):
    nu = draw(st.integers(1, max_users))
    ni = draw(st.integers(1, max_items))
    cells = draw(st.sets(st.tuples(st.integers(0, nu - 1), st.integers(0, ni - 1)), min_size=1, max_size=nu * ni))
    return build_graph(sorted(cells), nu, ni)
