"""Planted-community bipartite graphs for desk-scale experiments."""
from __future__ import annotations

import numpy as np


def block_graph(n_users: int = 200, n_items: int = 300, n_blocks: int = 5, n_edges: int = 6000,
                p_in: float = 0.9, seed: int = 7) -> np.ndarray:
    """Deduplicated (user, item) edges; each edge stays in the user's block with prob ``p_in``.

    Users and items are assigned to blocks round-robin. Within a block, items
    are drawn with a mild popularity skew so rankings are not pure ties.
    """
    rng = np.random.default_rng(seed)
    user_block = np.arange(n_users) % n_blocks
    item_block = np.arange(n_items) % n_blocks
    members = [np.flatnonzero(item_block == b) for b in range(n_blocks)]
    pop = [1.0 / np.arange(1, len(m) + 1) ** 0.5 for m in members]
    pop = [p / p.sum() for p in pop]
    edges = set()
    while len(edges) < n_edges:
        u = int(rng.integers(n_users))
        if rng.random() < p_in:
            b = user_block[u]
            i = int(rng.choice(members[b], p=pop[b]))
        else:
            i = int(rng.integers(n_items))
        edges.add((u, i))
    return np.array(sorted(edges), dtype=np.int64)
