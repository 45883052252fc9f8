"""Quantization-aware training loop.

Adam updates only the scale table. Codes change once per epoch when the
node's re-derived quantization function is applied to the mean of its
neighbors' dequantized rows.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .data import Dataset, split_validation
from .errors import InputError, NumericError
from .fp_model import AdamState, adam_step, epoch_batches, format_log_line, loss_and_grad, sample_batch
from .graph import InteractionGraph, propagate
from .metrics import EvalReport, evaluate
from .quant import (QuantizedModel, canonicalize, clamp_scales, extend_embedding, grad_scales,
                    init_quantizer, requantize_rau)

log = logging.getLogger(__name__)


def quantized_output(graph: InteractionGraph, model: QuantizedModel, n_layers: int) -> np.ndarray:
    """Averaged propagated representation over the full extended width."""
    return propagate(graph, extend_embedding(model), n_layers).averaged


def qat_step(graph: InteractionGraph, model: QuantizedModel, state: AdamState, batch, cfg: TrainConfig):
    """One batch: loss on the extended table, Adam on scales, clamp, re-sort."""
    with np.errstate(over="ignore", invalid="ignore"):
        losses, g0 = loss_and_grad(graph, extend_embedding(model), cfg.layers, batch, cfg.reg)
        gs = grad_scales(g0, model)
    if not np.isfinite(losses.total) or not np.all(np.isfinite(gs)):
        raise NumericError(f"non-finite loss {losses}")
    model.scales = adam_step(model.scales, gs, state)
    clamp_scales(model)
    model, perm = canonicalize(model, return_perm=True)
    state.m = np.take_along_axis(state.m, perm, axis=1)
    state.v = np.take_along_axis(state.v, perm, axis=1)
    return model, losses


@dataclass
class QatResult:
    model: QuantizedModel
    best_epoch: int
    best_val: EvalReport | None
    log: list = field(default_factory=list)


def train_gnaq(dataset: Dataset, pretrained: np.ndarray, cfg: TrainConfig,
               log_lines: list | None = None, debug: bool = False) -> QatResult:
    """Quantize ``pretrained`` and fine-tune it; returns the best validation Recall@20 epoch."""
    pretrained = np.asarray(pretrained, dtype=np.float64)
    n = dataset.graph_train.n_nodes
    if pretrained.shape != (n, cfg.dim):
        raise InputError(f"pretrained table has shape {pretrained.shape}, expected {(n, cfg.dim)}")
    fit = split_validation(dataset, cfg.val_ratio, cfg.seed)
    graph = fit.graph_train
    rng = np.random.default_rng(cfg.seed + 1)
    model = init_quantizer(pretrained, cfg.n_bits)
    state = AdamState.zeros_like(model.scales, lr=cfg.lr)
    lines = [] if log_lines is None else log_lines
    best = (-1.0, 0, model.copy(), None)
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        for b in range(epoch_batches(graph, cfg.batch_size)):
            try:
                model, losses = qat_step(graph, model, state, sample_batch(graph, cfg, rng), cfg)
            except NumericError as e:
                raise NumericError(f"epoch {epoch}, batch {b}: {e}") from e
            total += losses.total
            if debug:
                model.check()
        if cfg.use_rau:
            model = requantize_rau(graph, model, dynamic=cfg.use_dqs)
        if debug:
            model.check()
        report = evaluate(quantized_output(graph, model, cfg.layers), fit, cfg.eval_ks)
        lines.append(format_log_line(epoch, total, report))
        log.info("gnaq %s", lines[-1])
        if report.recall[20] > best[0]:
            best = (report.recall[20], epoch, model.copy(), report)
    return QatResult(best[2], best[1], best[3], lines)
