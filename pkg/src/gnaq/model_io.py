"""Binary model files, FP8 (E4M3) scale storage and n-bit code packing.

Layout (all integers little-endian), see FORMAT.md:

    magic "GNAQ" | version u16 | flags u16 | N u32 | d u32 | n u32 | payload
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .quant import QuantizedModel

MAGIC = b"GNAQ"
VERSION = 1
FLAG_FP = 0
FLAG_QUANT = 1
HEADER = struct.Struct("<4sHHIII")

FP8_MAX = 448.0
FP8_NAN = 0x7F


def _decode_byte(b: int) -> float:
    sign = -1.0 if b & 0x80 else 1.0
    exp = (b >> 3) & 0xF
    man = b & 0x7
    if exp == 0xF and man == 0x7:
        return math.copysign(math.nan, sign)
    if exp == 0:
        return sign * man / 8 * 2.0 ** -6
    return sign * (1 + man / 8) * 2.0 ** (exp - 7)


FP8_TABLE = np.array([_decode_byte(b) for b in range(256)], dtype=np.float64)
_POSITIVE = FP8_TABLE[:0x7F]  # 0x00..0x7E, ascending, 0x7E = 448


def fp8_decode(b):
    """E4M3 byte(s) to float(s)."""
    if np.isscalar(b):
        return float(FP8_TABLE[int(b)])
    return FP8_TABLE[np.asarray(b, dtype=np.uint8)]


def fp8_encode(x):
    """Round float(s) to E4M3 bytes: nearest, ties to even, saturating at +-448.

    NaN maps to 0x7F (0xFF when its sign bit is set).
    """
    scalar = np.isscalar(x)
    a = np.atleast_1d(np.asarray(x, dtype=np.float64))
    sign = np.signbit(a).astype(np.uint8) << 7
    mag = np.abs(a)
    nan = np.isnan(mag)
    mag = np.where(nan | (mag > FP8_MAX), FP8_MAX, mag)
    k = np.searchsorted(_POSITIVE, mag, side="right") - 1
    k = np.minimum(k, len(_POSITIVE) - 2)
    lo, hi = _POSITIVE[k], _POSITIVE[k + 1]
    # 2*mag and lo+hi are exact, so this compares distances without rounding
    twice, mid = 2 * mag, lo + hi
    up = (twice > mid) | ((twice == mid) & (k % 2 == 1))
    code = (k + up).astype(np.uint8)
    code = np.where(nan, FP8_NAN, code).astype(np.uint8) | sign
    return int(code[0]) if scalar else code


def fp8_round(x):
    return fp8_decode(fp8_encode(x))


def pack_codes(codes: np.ndarray, n_bits: int) -> bytes:
    """Pack each row into ceil(d*n/8) bytes, first code in the lowest bits."""
    codes = np.asarray(codes)
    if codes.ndim == 1:
        codes = codes[None]
    if codes.size and (codes.min() < 0 or codes.max() >= (1 << n_bits)):
        raise InputError(f"code outside [0, {1 << n_bits})")
    rows, d = codes.shape
    bits = ((codes[:, :, None].astype(np.int64) >> np.arange(n_bits)) & 1).astype(np.uint8)
    bits = bits.reshape(rows, d * n_bits)
    row_bytes = math.ceil(d * n_bits / 8)
    padded = np.zeros((rows, row_bytes * 8), dtype=np.uint8)
    padded[:, :d * n_bits] = bits
    return np.packbits(padded, axis=1, bitorder="little").tobytes()


def unpack_codes(data: bytes, rows: int, d: int, n_bits: int) -> np.ndarray:
    row_bytes = math.ceil(d * n_bits / 8)
    raw = np.frombuffer(data, dtype=np.uint8, count=rows * row_bytes).reshape(rows, row_bytes)
    bits = np.unpackbits(raw, axis=1, bitorder="little")[:, :d * n_bits].reshape(rows, d, n_bits)
    return (bits.astype(np.int64) << np.arange(n_bits)).sum(axis=2)


def quant_payload_size(n_nodes: int, d: int, n_bits: int) -> int:
    return n_nodes * (math.ceil(d * n_bits / 8) + (1 << n_bits) + 8)


def fp_payload_size(n_nodes: int, d: int) -> int:
    return n_nodes * d * 4


def compression_ratio(d: int, n_bits: int) -> float:
    return fp_payload_size(1, d) / quant_payload_size(1, d, n_bits)


def _range_f32(lo: np.ndarray, hi: np.ndarray):
    """Cast to float32, rounding outward so the stored range still covers the original."""
    lo32, hi32 = lo.astype("<f4"), hi.astype("<f4")
    lo32 = np.where(lo32.astype(np.float64) > lo, np.nextafter(lo32, np.float32(-np.inf)), lo32).astype("<f4")
    hi32 = np.where(hi32.astype(np.float64) < hi, np.nextafter(hi32, np.float32(np.inf)), hi32).astype("<f4")
    return lo32, hi32


def fp8_round_model(model: QuantizedModel) -> QuantizedModel:
    """Copy of ``model`` with scales rounded through FP8 as they would be on disk."""
    out = model.copy()
    out.scales = fp8_round(model.scales)
    return out


def save_model(model, path) -> int:
    """Write a full-precision table (2-D array) or a ``QuantizedModel``. Returns bytes written."""
    if isinstance(model, QuantizedModel):
        n, d, nb = model.n_nodes, model.dim, model.n_bits
        lo32, hi32 = _range_f32(model.range_lo, model.range_hi)
        payload = b"".join([
            pack_codes(model.codes, nb),
            fp8_encode(model.scales.ravel()).tobytes(),
            np.column_stack([lo32, hi32]).astype("<f4").tobytes(),
        ])
        header = HEADER.pack(MAGIC, VERSION, FLAG_QUANT, n, d, nb)
        assert len(payload) == quant_payload_size(n, d, nb)
    else:
        table = np.asarray(model, dtype=np.float64)
        if table.ndim != 2:
            raise InputError("full-precision model must be a 2-D table")
        n, d = table.shape
        payload = table.astype("<f4").tobytes()
        header = HEADER.pack(MAGIC, VERSION, FLAG_FP, n, d, 0)
    data = header + payload
    Path(path).write_bytes(data)
    return len(data)


@dataclass
class ModelHeader:
    version: int
    flags: int
    n_nodes: int
    dim: int
    n_bits: int

    @property
    def quantized(self) -> bool:
        return self.flags == FLAG_QUANT

    @property
    def payload_size(self) -> int:
        if self.quantized:
            return quant_payload_size(self.n_nodes, self.dim, self.n_bits)
        return fp_payload_size(self.n_nodes, self.dim)


def read_header(data: bytes) -> ModelHeader:
    if len(data) < HEADER.size:
        raise FormatError(f"file too short for header ({len(data)} < {HEADER.size} bytes)", len(data))
    magic, version, flags, n, d, nb = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if flags not in (FLAG_FP, FLAG_QUANT):
        raise FormatError(f"unknown flags {flags}", 6)
    if flags == FLAG_QUANT and not 1 <= nb <= 16:
        raise FormatError(f"bit width {nb} out of range", 16)
    return ModelHeader(version, flags, n, d, nb)


def load_model(path):
    """Inverse of ``save_model``; returns an array or a ``QuantizedModel``."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"cannot read model {path}: {e}") from e
    h = read_header(data)
    end = HEADER.size + h.payload_size
    if len(data) < end:
        raise FormatError(f"truncated payload: expected {end} bytes, file has {len(data)}", len(data))
    if len(data) > end:
        raise FormatError(f"{len(data) - end} trailing bytes", end)
    off = HEADER.size
    if not h.quantized:
        return np.frombuffer(data, dtype="<f4", count=h.n_nodes * h.dim, offset=off) \
            .reshape(h.n_nodes, h.dim).astype(np.float64)
    code_bytes = h.n_nodes * math.ceil(h.dim * h.n_bits / 8)
    levels = 1 << h.n_bits
    codes = unpack_codes(data[off:off + code_bytes], h.n_nodes, h.dim, h.n_bits)
    off += code_bytes
    scales = fp8_decode(np.frombuffer(data, dtype=np.uint8, count=h.n_nodes * levels, offset=off))
    off += h.n_nodes * levels
    ranges = np.frombuffer(data, dtype="<f4", count=2 * h.n_nodes, offset=off).reshape(h.n_nodes, 2)
    return QuantizedModel(h.n_bits, codes, scales.reshape(h.n_nodes, levels).copy(),
                          ranges[:, 0].astype(np.float64), ranges[:, 1].astype(np.float64))
