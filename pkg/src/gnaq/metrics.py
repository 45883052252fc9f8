"""Full-ranking top-K evaluation: Recall@K and NDCG@K."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


def score(h: np.ndarray, u: int, i: int, n_users: int) -> float:
    """Dot-product relevance of user ``u`` and item ``i`` over every column of ``h``."""
    n_items = h.shape[0] - n_users
    if not (0 <= u < n_users and 0 <= i < n_items):
        raise IndexError(f"user {u} or item {i} out of range")
    return float(h[u] @ h[n_users + i])


def rank_topk(h: np.ndarray, dataset, u: int, k: int) -> list:
    """Top-``k`` unseen items for ``u``, ties broken by lower item index."""
    g = dataset.graph_train
    scores = h[g.n_users:] @ h[u]
    seen = g.user_items(u)
    cand = np.setdiff1d(np.arange(g.n_items), seen)
    order = cand[np.argsort(-scores[cand], kind="stable")]
    return order[:min(k, len(order))].tolist()


def recall_at_k(topk, test_pos, k: int) -> float:
    test_pos = set(int(t) for t in test_pos)
    hits = sum(1 for it in list(topk)[:k] if int(it) in test_pos)
    return hits / len(test_pos)


def _idcg(n: int) -> float:
    return sum(1.0 / math.log2(r + 1) for r in range(1, n + 1))


def ndcg_at_k(topk, test_pos, k: int) -> float:
    test_pos = set(int(t) for t in test_pos)
    dcg = sum(1.0 / math.log2(r + 1) for r, it in enumerate(list(topk)[:k], start=1) if int(it) in test_pos)
    return dcg / _idcg(min(k, len(test_pos)))


@dataclass
class EvalReport:
    recall: dict = field(default_factory=dict)  # K -> mean recall
    ndcg: dict = field(default_factory=dict)
    n_users: int = 0

    def to_json(self) -> dict:
        return {
            "recall": {str(k): v for k, v in self.recall.items()},
            "ndcg": {str(k): v for k, v in self.ndcg.items()},
            "users": self.n_users,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False)

    def text(self) -> str:
        lines = [f"users: {self.n_users}"]
        for k in self.recall:
            lines.append(f"recall@{k}: {self.recall[k]:.6f}")
            lines.append(f"ndcg@{k}: {self.ndcg[k]:.6f}")
        return "\n".join(lines)


def evaluate(h: np.ndarray, dataset, ks=(10, 20), chunk: int | None = None) -> EvalReport:
    """Average Recall@K / NDCG@K over users with at least one held-out item."""
    g = dataset.graph_train
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] <= 0:
        raise InputError("K values must be positive")
    users = np.array([u for u, t in enumerate(dataset.test_positives) if len(t)], dtype=np.int64)
    if len(users) == 0:
        raise InputError("empty test set")
    kmax = min(ks[-1], g.n_items)
    if chunk is None:
        chunk = max(1, min(1024, (1 << 22) // g.n_items))  # bounds the dense score block
    discounts = 1.0 / np.log2(np.arange(2, kmax + 2))
    idcg_table = np.concatenate([[0.0], np.cumsum(discounts)])
    items_h = h[g.n_users:]
    rec_sum = {k: 0.0 for k in ks}
    ndcg_sum = {k: 0.0 for k in ks}
    f = g.csr_forward
    for s in range(0, len(users), chunk):
        batch = users[s:s + chunk]
        scores = h[batch] @ items_h.T
        seen = f[batch]
        rows = np.repeat(np.arange(len(batch)), np.diff(seen.indptr))
        scores[rows, seen.indices] = -np.inf
        top = np.argsort(-scores, axis=1, kind="stable")[:, :kmax]
        rel = np.zeros((len(batch), g.n_items), dtype=bool)
        n_pos = np.empty(len(batch), dtype=np.int64)
        for r, u in enumerate(batch):
            rel[r, dataset.test_positives[u]] = True
            n_pos[r] = len(dataset.test_positives[u])
        hits = np.take_along_axis(rel, top, axis=1)
        # excluded items sort last and are never test positives
        for k in ks:
            kk = min(k, kmax)
            hk = hits[:, :kk]
            rec_sum[k] += float(np.sum(hk.sum(axis=1) / n_pos))
            dcg = (hk * discounts[:kk]).sum(axis=1)
            ndcg_sum[k] += float(np.sum(dcg / idcg_table[np.minimum(k, n_pos).clip(max=kmax)]))
    m = len(users)
    return EvalReport({k: rec_sum[k] / m for k in ks}, {k: ndcg_sum[k] / m for k in ks}, m)
