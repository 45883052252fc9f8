import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnaq.data import dataset_from_edges
from gnaq.errors import InputError
from gnaq.metrics import evaluate, ndcg_at_k, rank_topk, recall_at_k


def brute_rank(h, train, n_users, u, k):
    """Score every unseen item, sort by (-score, item) with Python's sort."""
    n_items = h.shape[0] - n_users
    cands = [(-float(h[u] @ h[n_users + i]), i) for i in range(n_items) if i not in train[u]]
    return [i for _, i in sorted(cands)[:k]]


def brute_metrics(ranked, pos, k):
    hits = [1.0 if i in pos else 0.0 for i in ranked[:k]]
    dcg = sum(h / math.log2(r + 2) for r, h in enumerate(hits))
    idcg = sum(1 / math.log2(r + 2) for r in range(min(k, len(pos))))
    return sum(hits) / len(pos), dcg / idcg


def test_recall_examples():
    assert recall_at_k([1, 2, 3], [1, 3, 7, 8], 3) == 0.5
    assert recall_at_k([4, 5], [4, 5], 2) == 1.0
    assert recall_at_k([1], [2], 1) == 0.0


def test_ndcg_examples():
    assert ndcg_at_k([3], [3], 1) == 1.0
    assert ndcg_at_k([0, 3], [3], 2) == pytest.approx(1 / math.log2(3), abs=1e-15)
    assert ndcg_at_k([0, 1], [3], 2) == 0.0


def test_rank_excludes_train_and_breaks_ties_low_index():
    ds = dataset_from_edges([(0, 0)], [(0, 1)], 1, 2)
    h = np.ones((3, 2))
    assert rank_topk(h, ds, 0, 5) == [1]
    ds3 = dataset_from_edges([(0, 0)], [(0, 1)], 1, 4)
    assert rank_topk(np.ones((5, 2)), ds3, 0, 3) == [1, 2, 3]


def test_rank_matches_brute_force(rng):
    edges = [(0, i) for i in range(30) if rng.random() < 0.3]
    ds = dataset_from_edges(edges, [], 1, 30)
    h = rng.normal(size=(31, 4))
    train = [set(ds.graph_train.user_items(0).tolist())]
    assert rank_topk(h, ds, 0, 10) == brute_rank(h, train, 1, 0, 10)


def random_instance(seed, n_users=5, n_items=30, d=3, integer_scores=False):
    r = np.random.default_rng(seed)
    train, test = [], []
    for u in range(n_users):
        perm = r.permutation(n_items)
        n_tr, n_te = r.integers(1, 6), r.integers(0, 5)
        train += [(u, i) for i in perm[:n_tr]]
        test += [(u, i) for i in perm[n_tr:n_tr + n_te]]
    if not any(t[0] == 0 for t in test):
        test.append((0, int(r.permutation([i for i in range(n_items) if (0, i) not in train])[0])))
    ds = dataset_from_edges(train, test, n_users, n_items)
    h = r.normal(size=(n_users + n_items, d))
    if integer_scores:
        h = np.round(h)  # forces many ties
    return ds, h


def brute_report(ds, h, ks):
    train = [set(ds.graph_train.user_items(u).tolist()) for u in range(ds.n_users)]
    rec = {k: [] for k in ks}
    nd = {k: [] for k in ks}
    for u, pos in enumerate(ds.test_positives):
        if len(pos) == 0:
            continue
        ranked = brute_rank(h, train, ds.n_users, u, max(ks))
        for k in ks:
            a, b = brute_metrics(ranked, set(pos.tolist()), k)
            rec[k].append(a)
            nd[k].append(b)
    return {k: np.mean(v) for k, v in rec.items()}, {k: np.mean(v) for k, v in nd.items()}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_evaluate_matches_brute_force(seed, ties):
    ds, h = random_instance(seed, integer_scores=ties)
    rep = evaluate(h, ds, (1, 5, 10, 20))
    rec, nd = brute_report(ds, h, (1, 5, 10, 20))
    for k in (1, 5, 10, 20):
        assert abs(rep.recall[k] - rec[k]) <= 1e-12
        assert abs(rep.ndcg[k] - nd[k]) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_metrics_rank_only(seed):
    ds, h = random_instance(seed, d=1)
    a = evaluate(h, ds, (5, 10))
    # scores become 2x + 1
    h2 = np.hstack([2 * h, np.vstack([np.ones((ds.n_users, 1)), np.ones((ds.n_items, 1))])])
    b = evaluate(h2, ds, (5, 10))
    assert a.recall == b.recall and a.ndcg == b.ndcg
    for v in list(a.recall.values()) + list(a.ndcg.values()):
        assert 0.0 <= v <= 1.0


def test_ndcg_one_iff_positives_on_top():
    ds = dataset_from_edges([(0, 0)], [(0, 1), (0, 2)], 1, 5)
    h = np.array([[1.0], [0.0], [5.0], [4.0], [1.0], [0.5]])
    assert evaluate(h, ds, (2,)).ndcg[2] == 1.0
    h[3] = -1.0  # item 2 drops below item 3
    h[4] = 4.5
    assert evaluate(h, ds, (2,)).ndcg[2] < 1.0


def test_single_user_report_equals_user_metrics():
    ds, h = random_instance(3, n_users=1)
    rep = evaluate(h, ds, (10,))
    ranked = rank_topk(h, ds, 0, 10)
    assert rep.n_users == 1
    assert rep.recall[10] == pytest.approx(recall_at_k(ranked, ds.test_positives[0], 10), abs=1e-15)
    assert rep.ndcg[10] == pytest.approx(ndcg_at_k(ranked, ds.test_positives[0], 10), abs=1e-15)


def test_empty_test_set():
    ds = dataset_from_edges([(0, 0)], [], 1, 2)
    with pytest.raises(InputError):
        evaluate(np.ones((3, 1)), ds, (10,))


def test_report_json_shape():
    ds, h = random_instance(1)
    j = evaluate(h, ds, (10, 20)).to_json()
    assert set(j) == {"recall", "ndcg", "users"} and set(j["recall"]) == {"10", "20"}
