"""BPR and pairwise LambdaLoss with analytic gradients w.r.t. scores."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class LossBreakdown:
    bpr: float  # includes the regularization term
    lambda_: float
    reg: float
    total: float


def bpr_loss(pos_scores, neg_scores, reg_norm_sq: float = 0.0, reg: float = 0.0):
    """Summed BPR loss plus ``reg * reg_norm_sq``.

    Returns ``(loss, grad_pos, grad_neg)``.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.shape != neg.shape:
        raise ValueError("positive and negative score batches differ in shape")
    diff = pos - neg
    loss = float(np.sum(softplus(-diff))) + reg * reg_norm_sq
    g = -expit(-diff)
    return loss, g, -g


def lambda_loss(scores, relevance):
    """Pairwise logistic loss over every ordered pair with relevance_i > relevance_j.

    Works on a single list of shape ``(K,)`` or a batch ``(B, K)``; the loss is
    summed over lists. Returns ``(loss, grad)`` with ``grad`` shaped like ``scores``.
    """
    s = np.asarray(scores, dtype=np.float64)
    r = np.asarray(relevance, dtype=np.float64)
    single = s.ndim == 1
    if single:
        s, r = s[None], r[None]
    if s.shape[-1] < 2:
        raise ValueError("lambda loss needs lists of length >= 2")
    eta = np.sign(r[:, :, None] - r[:, None, :])
    mask = eta > 0
    diff = s[:, :, None] - s[:, None, :]
    loss = float(np.sum(np.where(mask, softplus(-diff), 0.0)))
    w = np.where(mask, -expit(-diff), 0.0)  # d/d s_i of pair (i, j); s_j gets the negative
    grad = w.sum(axis=2) - w.sum(axis=1)
    return loss, (grad[0] if single else grad)


def combined_loss(bpr: float, lambda_: float | None = None, reg: float = 0.0) -> LossBreakdown:
    lam = 0.0 if lambda_ is None else float(lambda_)
    return LossBreakdown(float(bpr), lam, float(reg), float(bpr) + lam)
