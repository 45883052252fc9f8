"""Full-precision LightGCN pre-training with hand-derived gradients and Adam."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .data import Dataset, build_lambda_lists, sample_bpr_arrays, split_validation
from .errors import InputError, NumericError
from .graph import InteractionGraph, backpropagate, propagate
from .losses import LossBreakdown, bpr_loss, combined_loss, lambda_loss
from .metrics import EvalReport, evaluate

log = logging.getLogger(__name__)


def init_embeddings(n_nodes: int, dim: int, seed=0, std: float = 0.1) -> np.ndarray:
    if n_nodes <= 0 or dim <= 0:
        raise InputError("embedding table needs positive shape")
    return np.random.default_rng(seed).normal(0.0, std, size=(n_nodes, dim))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray, lr: float = 1e-3, **kw) -> "AdamState":
        return cls(np.zeros_like(params, dtype=np.float64), np.zeros_like(params, dtype=np.float64), lr=lr, **kw)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update. Moments and step counter update in place."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1 - b1) * grads
    state.v *= b2
    state.v += (1 - b2) * grads * grads
    m_hat = state.m / (1 - b1 ** state.step)
    v_hat = state.v / (1 - b2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class Batch:
    users: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    list_users: np.ndarray | None = None
    list_items: np.ndarray | None = None
    list_rel: np.ndarray | None = None


def sample_batch(graph: InteractionGraph, cfg: TrainConfig, rng: np.random.Generator) -> Batch:
    users, pos, neg = sample_bpr_arrays(graph, cfg.batch_size, rng)
    b = Batch(users, pos, neg)
    if cfg.use_rank_loss:
        lu = np.unique(users)
        b.list_items, b.list_rel = build_lambda_lists(graph, lu, cfg.list_len, rng)
        b.list_users = lu
    return b


def loss_and_grad(graph: InteractionGraph, h0: np.ndarray, n_layers: int, batch: Batch,
                  reg: float) -> tuple[LossBreakdown, np.ndarray]:
    """Combined BPR + LambdaLoss on ``batch`` and its gradient w.r.t. the input table ``h0``.

    The regularizer is the squared norm of the input rows touched by each triple.
    """
    U = graph.n_users
    H = propagate(graph, h0, n_layers).averaged
    u, p, n = batch.users, U + batch.pos, U + batch.neg
    hu, hp, hn = H[u], H[p], H[n]
    reg_sq = float(np.sum(h0[u] ** 2) + np.sum(h0[p] ** 2) + np.sum(h0[n] ** 2))
    bpr, gp, gn = bpr_loss(np.einsum("ij,ij->i", hu, hp), np.einsum("ij,ij->i", hu, hn), reg_sq, reg)

    gH = np.zeros_like(H)
    np.add.at(gH, u, gp[:, None] * hp + gn[:, None] * hn)
    np.add.at(gH, p, gp[:, None] * hu)
    np.add.at(gH, n, gn[:, None] * hu)

    lam = None
    if batch.list_users is not None:
        lu = batch.list_users
        li = U + batch.list_items
        hl = H[lu]
        hi = H[li]
        scores = np.einsum("bd,bkd->bk", hl, hi)
        lam, gs = lambda_loss(scores, batch.list_rel)
        np.add.at(gH, lu, np.einsum("bk,bkd->bd", gs, hi))
        np.add.at(gH, li.ravel(), (gs[..., None] * hl[:, None, :]).reshape(-1, H.shape[1]))

    g0 = backpropagate(graph, gH, n_layers)
    for rows in (u, p, n):
        np.add.at(g0, rows, 2.0 * reg * h0[rows])
    return combined_loss(bpr, lam, reg * reg_sq), g0


def epoch_batches(graph: InteractionGraph, batch_size: int) -> int:
    return max(1, math.ceil(graph.n_edges / batch_size))


def format_log_line(epoch: int, loss: float, report: EvalReport | None) -> str:
    r = report.recall.get(20, float("nan")) if report else float("nan")
    nd = report.ndcg.get(20, float("nan")) if report else float("nan")
    return f"{epoch}\t{loss:.6f}\t{r:.6f}\t{nd:.6f}"


@dataclass
class FitResult:
    table: np.ndarray
    best_epoch: int
    best_val: EvalReport | None
    log: list = field(default_factory=list)


def train_fp(dataset: Dataset, cfg: TrainConfig, log_lines: list | None = None) -> FitResult:
    """Pre-train a full-precision table, keeping the best validation Recall@20 epoch."""
    fit = split_validation(dataset, cfg.val_ratio, cfg.seed)
    graph = fit.graph_train
    rng = np.random.default_rng(cfg.seed)
    E = init_embeddings(graph.n_nodes, cfg.dim, rng, cfg.init_std)
    state = AdamState.zeros_like(E, lr=cfg.lr)
    lines = [] if log_lines is None else log_lines
    best = (-1.0, 0, E.copy(), None)
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        for b in range(epoch_batches(graph, cfg.batch_size)):
            batch = sample_batch(graph, cfg, rng)
            with np.errstate(over="ignore", invalid="ignore"):
                losses, grad = loss_and_grad(graph, E, cfg.layers, batch, cfg.reg)
            if not np.isfinite(losses.total) or not np.all(np.isfinite(grad)):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}: {losses}")
            total += losses.total
            E = adam_step(E, grad, state)
        report = evaluate(propagate(graph, E, cfg.layers).averaged, fit, cfg.eval_ks)
        lines.append(format_log_line(epoch, total, report))
        log.info("fp %s", lines[-1])
        if report.recall[20] > best[0]:
            best = (report.recall[20], epoch, E.copy(), report)
    return FitResult(best[2], best[1], best[3], lines)
