"""Node-aware asymmetric n-bit quantizer with learnable interval scaling factors.

Each node row ``i`` keeps integer codes in ``[0, 2**n)``, a sorted row of
``2**n`` scaling factors (the value each code dequantizes to) and the range
``[lo_i, hi_i]`` its quantization function covers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .graph import InteractionGraph, neighbor_mean

CONSTANT_ROW_EPS = 1e-6


@dataclass
class QuantizedModel:
    n_bits: int
    codes: np.ndarray  # (N, d) integer
    scales: np.ndarray  # (N, 2**n) float, rows ascending
    range_lo: np.ndarray  # (N,)
    range_hi: np.ndarray  # (N,)

    @property
    def levels(self) -> int:
        return 1 << self.n_bits

    @property
    def dim(self) -> int:
        return self.codes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.codes.shape[0]

    def copy(self) -> "QuantizedModel":
        return QuantizedModel(self.n_bits, self.codes.copy(), self.scales.copy(),
                              self.range_lo.copy(), self.range_hi.copy())

    def check(self) -> None:
        """Assert the structural invariants (debug helper)."""
        assert self.codes.min(initial=0) >= 0 and self.codes.max(initial=0) < self.levels
        assert self.scales.shape == (self.n_nodes, self.levels)
        assert np.all(np.diff(self.scales, axis=1) >= 0), "scale rows not sorted"
        assert np.all(self.scales >= self.range_lo[:, None]) and np.all(self.scales <= self.range_hi[:, None])
        assert np.all(self.range_lo < self.range_hi)


def _bin(values: np.ndarray, interior: np.ndarray) -> np.ndarray:
    """Code = number of interior boundaries <= value (right-open intervals, top closed)."""
    return (values[:, :, None] >= interior[:, None, :]).sum(axis=2).astype(np.int64)


def init_quantizer(e_full: np.ndarray, n_bits: int = 2) -> QuantizedModel:
    """Uniform per-row quantizer: 2**n equal intervals over [min, max], midpoints as scales."""
    e = np.asarray(e_full, dtype=np.float64)
    if n_bits < 1:
        raise InputError("bit width must be >= 1")
    if e.ndim != 2 or not np.all(np.isfinite(e)):
        raise InputError("embedding table must be a finite 2-D array")
    levels = 1 << n_bits
    lo, hi = e.min(axis=1), e.max(axis=1)
    gap = (hi - lo) / levels
    k = np.arange(levels)
    interior = lo[:, None] + k[None, 1:] * gap[:, None]
    codes = _bin(e, interior)
    scales = lo[:, None] + (2 * k[None, :] + 1) * gap[:, None] / 2
    const = gap == 0
    codes[const] = 0
    scales[const] = lo[const, None]
    lo = np.where(const, lo - CONSTANT_ROW_EPS, lo)
    hi = np.where(const, hi + CONSTANT_ROW_EPS, hi)
    return QuantizedModel(n_bits, codes, scales, lo, hi)


def dequantize(model: QuantizedModel) -> np.ndarray:
    return np.take_along_axis(model.scales, model.codes, axis=1)


def extend_embedding(model: QuantizedModel) -> np.ndarray:
    """Dequantized values followed by the node's scale row: shape (N, d + 2**n)."""
    return np.hstack([dequantize(model), model.scales])


def grad_scales(grad_h0: np.ndarray, model: QuantizedModel) -> np.ndarray:
    """Gradient w.r.t. the scale table given the gradient w.r.t. the extended table.

    Sums the gather path (every entry dequantized through a scale) and the
    direct path of the appended scale columns.
    """
    d, levels = model.dim, model.levels
    if grad_h0.shape != (model.n_nodes, d + levels):
        raise InputError(f"expected gradient of shape {(model.n_nodes, d + levels)}, got {grad_h0.shape}")
    flat = (np.arange(model.n_nodes)[:, None] * levels + model.codes).ravel()
    gather = np.bincount(flat, weights=grad_h0[:, :d].ravel(), minlength=model.n_nodes * levels)
    return gather.reshape(model.n_nodes, levels) + grad_h0[:, d:]


def update_steps(scale_row, lo, hi):
    """Interval boundaries from learned scales.

    Sorts the (clamped) scales and places a boundary halfway between each
    adjacent pair, with ``lo`` and ``hi`` closing the ends. Returns
    ``(boundaries, sorted_scales, permutation)``; step sizes are
    ``np.diff(boundaries)``. Works on object arrays (e.g. ``Fraction``).
    """
    s = np.asarray(scale_row)
    if not lo < hi:
        raise InputError("range must satisfy lo < hi")
    s = np.array([min(max(x, lo), hi) for x in s], dtype=s.dtype)
    perm = np.argsort(s, kind="stable")
    ss = s[perm]
    mids = (ss[:-1] + ss[1:]) / 2
    bounds = np.concatenate([np.array([lo], dtype=ss.dtype), mids, np.array([hi], dtype=ss.dtype)])
    return bounds, ss, perm


def boundaries(model: QuantizedModel, dynamic: bool = True) -> np.ndarray:
    """All interval boundaries, shape (N, 2**n + 1), for sorted-scale models.

    ``dynamic=False`` keeps equal steps over the node's range.
    """
    lo, hi = model.range_lo[:, None], model.range_hi[:, None]
    if dynamic:
        s = np.clip(model.scales, lo, hi)
        mids = (s[:, :-1] + s[:, 1:]) / 2
    else:
        k = np.arange(1, model.levels)[None, :]
        mids = lo + k * (hi - lo) / model.levels
    return np.hstack([lo, mids, hi])


def quantize_values(values: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Codes for ``values`` (N, d) under per-row ``bounds`` (N, 2**n + 1)."""
    return _bin(np.asarray(values, dtype=np.float64), bounds[:, 1:-1])


def canonicalize(model: QuantizedModel, return_perm: bool = False):
    """Sort each scale row and remap codes so dequantized values are unchanged.

    With ``return_perm`` also returns the per-row sort permutation, so that
    per-slot optimizer state can follow its scale.
    """
    perm = np.argsort(model.scales, axis=1, kind="stable")
    inv = np.empty_like(perm)
    np.put_along_axis(inv, perm, np.broadcast_to(np.arange(model.levels), perm.shape), axis=1)
    out = QuantizedModel(model.n_bits,
                         np.take_along_axis(inv, model.codes, axis=1),
                         np.take_along_axis(model.scales, perm, axis=1),
                         model.range_lo.copy(), model.range_hi.copy())
    return (out, perm) if return_perm else out


def clamp_scales(model: QuantizedModel) -> None:
    np.clip(model.scales, model.range_lo[:, None], model.range_hi[:, None], out=model.scales)


def requantize_rau(graph: InteractionGraph, model: QuantizedModel, dynamic: bool = True) -> QuantizedModel:
    """Re-bin every node's codes against the mean of its neighbors' dequantized rows.

    The node range only ever grows, so every aggregated value stays representable.
    Scales are left untouched.
    """
    agg = neighbor_mean(graph, dequantize(model))
    lo = np.minimum.reduce([model.range_lo, agg.min(axis=1), model.scales[:, 0]])
    hi = np.maximum.reduce([model.range_hi, agg.max(axis=1), model.scales[:, -1]])
    out = QuantizedModel(model.n_bits, model.codes, model.scales.copy(), lo, hi)
    out.codes = quantize_values(agg, boundaries(out, dynamic))
    return out
