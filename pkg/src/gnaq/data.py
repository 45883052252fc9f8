"""Dataset parsing, train/test splitting and training-sample generation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError, SamplingError
from .graph import InteractionGraph, build_graph

FORMATS = ("triplet", "adjlist")


@dataclass(frozen=True)
class Dataset:
    graph_train: InteractionGraph
    test_positives: list  # per user, sorted int array of held-out items
    user_ids: dict
    item_ids: dict

    @property
    def n_users(self) -> int:
        return self.graph_train.n_users

    @property
    def n_items(self) -> int:
        return self.graph_train.n_items

    def test_edges(self) -> np.ndarray:
        rows = [np.column_stack([np.full(len(t), u), t]) for u, t in enumerate(self.test_positives) if len(t)]
        if not rows:
            return np.empty((0, 2), dtype=np.int64)
        return np.concatenate(rows).astype(np.int64)


@dataclass(frozen=True)
class BprTriple:
    u: int
    i_pos: int
    i_neg: int


def parse_interactions(path, fmt: str = "triplet"):
    """Read an interaction file into ``(edges, user_ids, item_ids)``.

    External ids are remapped densely in first-seen order.
    """
    if fmt not in FORMATS:
        raise InputError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    user_ids: dict = {}
    item_ids: dict = {}
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.split()
            if not tok:
                continue
            if fmt == "triplet":
                if len(tok) < 2:
                    raise ParseError(f"expected 'user item [rating] [timestamp]', got {line.strip()!r}", lineno)
                items = tok[1:2]
            else:
                items = tok[1:]
            u = user_ids.setdefault(tok[0], len(user_ids))
            for it in items:
                edges.append((u, item_ids.setdefault(it, len(item_ids))))
    if not edges:
        raise InputError(f"no interactions in {path}")
    return np.asarray(edges, dtype=np.int64), user_ids, item_ids


def write_interactions(path, edges, fmt: str = "triplet") -> None:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "triplet":
            for u, i in edges:
                fh.write(f"{u} {i}\n")
        elif fmt == "adjlist":
            order = np.argsort(edges[:, 0], kind="stable")
            users, starts = np.unique(edges[order, 0], return_index=True)
            for k, u in enumerate(users):
                end = starts[k + 1] if k + 1 < len(starts) else len(order)
                items = " ".join(str(i) for i in edges[order[starts[k]:end], 1])
                fh.write(f"{u} {items}\n")
        else:
            raise InputError(f"unknown format {fmt!r}")


def _split_edges(edges: np.ndarray, ratio: float, rng: np.random.Generator):
    """Per user, move ceil(ratio * deg) edges to the held-out part (deg 1 users keep theirs)."""
    edges = np.unique(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=0)
    users, starts, counts = np.unique(edges[:, 0], return_index=True, return_counts=True)
    held = np.zeros(len(edges), dtype=bool)
    for s, c in zip(starts, counts):
        if c < 2:
            continue
        k = min(math.ceil(ratio * c), c - 1)
        pick = rng.choice(c, size=k, replace=False)
        held[s + pick] = True
    return edges[~held], edges[held]


def _group(edges: np.ndarray, n_users: int) -> list:
    out = [np.empty(0, dtype=np.int64) for _ in range(n_users)]
    if len(edges):
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        e = edges[order]
        users, starts = np.unique(e[:, 0], return_index=True)
        bounds = list(starts[1:]) + [len(e)]
        for u, s, t in zip(users, starts, bounds):
            out[u] = e[s:t, 1].copy()
    return out


def split_train_test(edges, holdout_ratio: float = 0.2, seed: int = 0,
                     n_users: int | None = None, n_items: int | None = None,
                     user_ids: dict | None = None, item_ids: dict | None = None) -> Dataset:
    if not 0.0 < holdout_ratio < 1.0:
        raise InputError("holdout ratio must lie in (0, 1)")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        raise InputError("empty edge list")
    n_users = int(edges[:, 0].max()) + 1 if n_users is None else n_users
    n_items = int(edges[:, 1].max()) + 1 if n_items is None else n_items
    train, test = _split_edges(edges, holdout_ratio, np.random.default_rng(seed))
    graph = build_graph(train, n_users, n_items)
    return Dataset(graph, _group(test, n_users), user_ids or {}, item_ids or {})


def dataset_from_edges(train_edges, test_edges, n_users: int, n_items: int,
                       user_ids: dict | None = None, item_ids: dict | None = None) -> Dataset:
    graph = build_graph(train_edges, n_users, n_items)
    test = np.asarray(test_edges, dtype=np.int64).reshape(-1, 2)
    if len(test):
        if test[:, 0].max() >= n_users or test[:, 1].max() >= n_items or test.min() < 0:
            raise InputError("test edge index out of range")
        test = np.unique(test, axis=0)
        keep = graph.csr_forward[test[:, 0], test[:, 1]].A1 == 0
        test = test[keep]
    return Dataset(graph, _group(test, n_users), user_ids or {}, item_ids or {})


def split_validation(dataset: Dataset, ratio: float = 0.1, seed: int = 0) -> Dataset:
    """Carve a per-user validation slice out of the training edges.

    The returned dataset trains on the remaining edges and uses the slice as
    its held-out positives.
    """
    fit = split_train_test(dataset.graph_train.edges, ratio, seed,
                           dataset.n_users, dataset.n_items, dataset.user_ids, dataset.item_ids)
    return fit


def _sample_negatives(graph: InteractionGraph, users: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform items rejected while they are train positives of the user."""
    f = graph.csr_forward
    deg = graph.degree[users]
    if np.any(deg >= graph.n_items):
        bad = int(users[np.argmax(deg >= graph.n_items)])
        raise SamplingError(f"user {bad} interacts with every item; no negative to sample")
    neg = rng.integers(0, graph.n_items, size=len(users))
    todo = np.arange(len(users))
    while len(todo):
        hit = np.asarray(f[users[todo], neg[todo]]).ravel() != 0
        todo = todo[hit]
        neg[todo] = rng.integers(0, graph.n_items, size=len(todo))
    return neg


def sample_bpr_arrays(graph: InteractionGraph, batch_size: int, rng: np.random.Generator):
    """Vectorized BPR sampling: users uniform over users with train edges."""
    active = np.flatnonzero(graph.degree[:graph.n_users] > 0)
    if len(active) == 0:
        raise SamplingError("no user has training interactions")
    users = active[rng.integers(0, len(active), size=batch_size)]
    f = graph.csr_forward
    start = f.indptr[users]
    deg = f.indptr[users + 1] - start
    pos = f.indices[start + (rng.random(batch_size) * deg).astype(np.int64)]
    neg = _sample_negatives(graph, users, rng)
    return users.astype(np.int64), pos.astype(np.int64), neg.astype(np.int64)


def sample_bpr_triples(dataset: Dataset, batch_size: int, rng) -> list:
    rng = np.random.default_rng(rng)
    u, p, n = sample_bpr_arrays(dataset.graph_train, batch_size, rng)
    return [BprTriple(int(a), int(b), int(c)) for a, b, c in zip(u, p, n)]


def build_lambda_lists(graph_or_dataset, users, list_len: int = 10, rng=None):
    """Per user: one train positive (relevance 1) plus ``list_len - 1`` distinct negatives.

    Returns ``(items, relevance)`` arrays of shape ``(len(users), list_len)``.
    """
    graph = getattr(graph_or_dataset, "graph_train", graph_or_dataset)
    if list_len < 2:
        raise InputError("list length must be >= 2")
    rng = np.random.default_rng(rng)
    users = np.asarray(users, dtype=np.int64)
    f = graph.csr_forward
    deg = graph.degree[users]
    if np.any(deg == 0):
        raise SamplingError("user without training interactions in lambda list")
    if np.any(graph.n_items - deg < list_len - 1):
        raise SamplingError(f"a user has fewer than {list_len - 1} non-interacted items")
    items = np.empty((len(users), list_len), dtype=np.int64)
    start = f.indptr[users]
    items[:, 0] = f.indices[start + (rng.random(len(users)) * deg).astype(np.int64)]
    for r, u in enumerate(users):
        seen = set(f.indices[f.indptr[u]:f.indptr[u + 1]].tolist())
        got = []
        while len(got) < list_len - 1:
            j = int(rng.integers(graph.n_items))
            if j not in seen:
                seen.add(j)
                got.append(j)
        items[r, 1:] = got
    relevance = np.zeros((len(users), list_len))
    relevance[:, 0] = 1.0
    return items, relevance


TRAIN_FILE = "train.txt"
TEST_FILE = "test.txt"
USER_MAP_FILE = "user_map.txt"
ITEM_MAP_FILE = "item_map.txt"


def _write_map(path: Path, ids: dict, n: int) -> None:
    inv = {v: k for k, v in ids.items()}
    with open(path, "w", encoding="utf-8") as fh:
        for idx in range(n):
            fh.write(f"{inv.get(idx, idx)}\t{idx}\n")


def _read_map(path: Path) -> dict:
    ids = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ParseError("expected 'external_id<TAB>internal_index'", lineno)
            try:
                ids[parts[0]] = int(parts[1])
            except ValueError:
                raise ParseError(f"bad index {parts[1]!r}", lineno) from None
    if sorted(ids.values()) != list(range(len(ids))):
        raise InputError(f"{path}: internal indices are not dense 0..{len(ids) - 1}")
    return ids


def write_split(dataset: Dataset, out_dir) -> None:
    """Write train/test edges (internal indices, triplet format) and both id maps."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_interactions(out / TRAIN_FILE, dataset.graph_train.edges)
    write_interactions(out / TEST_FILE, dataset.test_edges())
    _write_map(out / USER_MAP_FILE, dataset.user_ids, dataset.n_users)
    _write_map(out / ITEM_MAP_FILE, dataset.item_ids, dataset.n_items)


def _read_edges(path: Path) -> np.ndarray:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.split()
            if not tok:
                continue
            if len(tok) < 2:
                raise ParseError("expected 'user item'", lineno)
            try:
                edges.append((int(tok[0]), int(tok[1])))
            except ValueError:
                raise ParseError(f"{path.name}: non-integer index", lineno) from None
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def load_split(data_dir) -> Dataset:
    d = Path(data_dir)
    for name in (TRAIN_FILE, TEST_FILE, USER_MAP_FILE, ITEM_MAP_FILE):
        if not (d / name).is_file():
            raise InputError(f"missing {d / name}")
    users = _read_map(d / USER_MAP_FILE)
    items = _read_map(d / ITEM_MAP_FILE)
    return dataset_from_edges(_read_edges(d / TRAIN_FILE), _read_edges(d / TEST_FILE),
                              len(users), len(items), users, items)


def dataset_stats(dataset: Dataset) -> dict:
    n = dataset.graph_train.n_edges + len(dataset.test_edges())
    return {
        "users": dataset.n_users,
        "items": dataset.n_items,
        "interactions": n,
        "sparsity": n / (dataset.n_users * dataset.n_items),
    }
