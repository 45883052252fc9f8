"""Bipartite interaction graph and LightGCN-style propagation.

Node indexing is unified: users occupy ``0..n_users-1`` and items occupy
``n_users..N-1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InputError


@dataclass(frozen=True)
class InteractionGraph:
    n_users: int
    n_items: int
    edges: np.ndarray  # (E, 2) int64, sorted, deduplicated (user, item)
    csr_forward: sp.csr_matrix  # n_users x n_items
    csr_reverse: sp.csr_matrix  # n_items x n_users
    degree: np.ndarray  # (N,) int64
    _norm_adj: sp.csr_matrix = field(repr=False, compare=False)
    _adj: sp.csr_matrix = field(repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.n_users + self.n_items

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def norm_adj(self) -> sp.csr_matrix:
        """Symmetric normalized adjacency D^-1/2 A D^-1/2 over all N nodes."""
        return self._norm_adj

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._adj

    def user_items(self, u: int) -> np.ndarray:
        f = self.csr_forward
        return f.indices[f.indptr[u]:f.indptr[u + 1]]


def build_graph(interactions, n_users: int, n_items: int) -> InteractionGraph:
    edges = np.asarray(interactions, dtype=np.int64).reshape(-1, 2) if len(interactions) else np.empty((0, 2), np.int64)
    if n_users <= 0 or n_items <= 0:
        raise InputError("n_users and n_items must be positive")
    if len(edges) == 0:
        raise InputError("empty edge list")
    u, i = edges[:, 0], edges[:, 1]
    if u.min() < 0 or u.max() >= n_users:
        raise InputError(f"user index out of range [0, {n_users})")
    if i.min() < 0 or i.max() >= n_items:
        raise InputError(f"item index out of range [0, {n_items})")
    edges = np.unique(edges, axis=0)
    u, i = edges[:, 0], edges[:, 1]

    ones = np.ones(len(edges))
    forward = sp.csr_matrix((ones, (u, i)), shape=(n_users, n_items))
    forward.sort_indices()
    reverse = forward.T.tocsr()
    reverse.sort_indices()

    n = n_users + n_items
    degree = np.concatenate([np.diff(forward.indptr), np.diff(reverse.indptr)]).astype(np.int64)
    adj = sp.bmat([[None, forward], [reverse, None]], format="csr")
    adj.sort_indices()
    # zero-degree nodes get a zero factor so they neither send nor receive
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.maximum(degree, 1)), 0.0)
    d = sp.diags(inv_sqrt)
    norm = (d @ adj @ d).tocsr()
    norm.sort_indices()
    assert adj.shape == (n, n)
    return InteractionGraph(n_users, n_items, edges, forward, reverse, degree, norm, adj)


@dataclass
class PropagationState:
    layers: list
    averaged: np.ndarray


def _check_rows(graph: InteractionGraph, table: np.ndarray, name: str) -> np.ndarray:
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] != graph.n_nodes:
        raise InputError(f"{name} must have shape ({graph.n_nodes}, w), got {table.shape}")
    return table


def propagate(graph: InteractionGraph, h0: np.ndarray, n_layers: int) -> PropagationState:
    """Run ``n_layers`` rounds of normalized propagation and average all layers."""
    h = _check_rows(graph, h0, "h0")
    if n_layers < 1:
        raise InputError("n_layers must be >= 1")
    layers = [h]
    acc = h.copy()
    for _ in range(n_layers):
        h = graph.norm_adj @ h
        layers.append(h)
        acc += h
    return PropagationState(layers, acc / (n_layers + 1))


def backpropagate(graph: InteractionGraph, grad_h: np.ndarray, n_layers: int) -> np.ndarray:
    """Gradient w.r.t. the input table given the gradient w.r.t. the averaged output.

    The normalized adjacency is symmetric, so the adjoint is the forward map.
    """
    return propagate(graph, grad_h, n_layers).averaged


def neighbor_mean(graph: InteractionGraph, table: np.ndarray) -> np.ndarray:
    """Mean of first-order neighbor rows; isolated nodes keep their own row."""
    table = _check_rows(graph, table, "table")
    deg = graph.degree
    out = graph.adjacency @ table
    has = deg > 0
    out[has] /= deg[has, None]
    out[~has] = table[~has]
    return out
