import math

import ml_dtypes
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gnaq.errors import FormatError, InputError
from gnaq.model_io import (FP8_TABLE, compression_ratio, fp8_decode, fp8_encode, fp8_round_model, load_model,
                           pack_codes, quant_payload_size, save_model, unpack_codes)
from gnaq.quant import init_quantizer


def e4m3_by_hand(b):
    """Sign / 4-bit exponent (bias 7) / 3-bit mantissa, written out from the bit layout."""
    s = (b >> 7) & 1
    e = (b >> 3) & 0b1111
    m = b & 0b111
    if e == 0b1111 and m == 0b111:
        return math.nan
    mag = (m / 8) * 2.0 ** (1 - 7) if e == 0 else (1 + m / 8) * 2.0 ** (e - 7)
    return -mag if s else mag


def test_decode_table_all_bytes():
    for b in range(256):
        want = e4m3_by_hand(b)
        got = fp8_decode(b)
        if math.isnan(want):
            assert math.isnan(got)
        else:
            assert got == want and math.copysign(1, got) == math.copysign(1, want)


def test_decode_agrees_with_ml_dtypes():
    ref = np.arange(256, dtype=np.uint8).view(ml_dtypes.float8_e4m3fn).astype(np.float64)
    np.testing.assert_array_equal(np.isnan(ref), np.isnan(FP8_TABLE))
    ok = ~np.isnan(ref)
    np.testing.assert_array_equal(ref[ok], FP8_TABLE[ok])


def test_encode_decode_identity_all_codes():
    for b in range(256):
        assert fp8_encode(fp8_decode(b)) == b


def test_known_values():
    assert fp8_encode(1.0) == 0x38 and fp8_decode(0x38) == 1.0
    assert fp8_encode(0.0) == 0x00 and fp8_decode(0x00) == 0.0
    assert fp8_decode(fp8_encode(1000.0)) == 448.0
    assert fp8_decode(fp8_encode(-1000.0)) == -448.0
    assert fp8_encode(math.nan) == 0x7F
    assert fp8_decode(0x01) == 2.0 ** -9  # smallest subnormal


def test_round_half_to_even():
    # 1.0625 is halfway between 1.0 (mantissa 000) and 1.125 (001)
    assert fp8_decode(fp8_encode(1.0625)) == 1.0
    # 1.1875 is halfway between 1.125 (001) and 1.25 (010)
    assert fp8_decode(fp8_encode(1.1875)) == 1.25
    # halfway between the two smallest subnormals
    assert fp8_encode(1.5 * 2.0 ** -9) == 0x02


@given(st.floats(-448, 448, allow_nan=False))
def test_encode_matches_ml_dtypes_in_range(x):
    ref = np.array([x], dtype=np.float64).astype(ml_dtypes.float8_e4m3fn).view(np.uint8)[0]
    got = fp8_encode(x)
    assert fp8_decode(got) == fp8_decode(int(ref))


@given(st.floats(2.0 ** -6, 448))
def test_relative_error_bound(x):
    assert abs(fp8_decode(fp8_encode(x)) - x) <= 2.0 ** -3 * abs(x)


def test_pack_example():
    assert pack_codes(np.array([[3, 0, 1, 2]]), 2) == bytes([0x93])


def test_pack_padding():
    assert len(pack_codes(np.zeros((1, 5), int), 2)) == 2
    assert len(pack_codes(np.zeros((3, 5), int), 3)) == 3 * 2


def test_pack_rejects_big_code():
    with pytest.raises(InputError):
        pack_codes(np.array([[4]]), 2)


@given(st.integers(1, 8), st.integers(1, 5), st.integers(1, 13), st.integers(0, 2**31))
def test_pack_round_trip(n_bits, rows, d, seed):
    codes = np.random.default_rng(seed).integers(0, 1 << n_bits, size=(rows, d))
    data = pack_codes(codes, n_bits)
    assert len(data) == rows * math.ceil(d * n_bits / 8)
    np.testing.assert_array_equal(unpack_codes(data, rows, d, n_bits), codes)


def test_quant_file_round_trip(tmp_path, rng):
    m = init_quantizer(rng.normal(0, 0.1, size=(50, 16)), 2)
    path = tmp_path / "q.gnaq"
    n = save_model(m, path)
    assert n == 20 + quant_payload_size(50, 16, 2) == path.stat().st_size
    back = load_model(path)
    np.testing.assert_array_equal(back.codes, m.codes)
    np.testing.assert_array_equal(back.scales, fp8_round_model(m).scales)
    assert np.all(back.range_lo <= m.range_lo) and np.all(back.range_hi >= m.range_hi)
    np.testing.assert_allclose(back.range_lo, m.range_lo, rtol=1e-6)


def test_fp_file_round_trip(tmp_path, rng):
    e = rng.normal(size=(7, 3))
    save_model(e, tmp_path / "fp.gnaq")
    np.testing.assert_array_equal(load_model(tmp_path / "fp.gnaq"), e.astype(np.float32))


def test_header_is_little_endian(tmp_path):
    save_model(np.zeros((2, 3)), tmp_path / "fp.gnaq")
    raw = (tmp_path / "fp.gnaq").read_bytes()
    assert raw[:4] == b"GNAQ" and raw[4:6] == b"\x01\x00" and raw[8:12] == b"\x02\x00\x00\x00"


def test_corrupt_files(tmp_path, rng):
    path = tmp_path / "q.gnaq"
    save_model(init_quantizer(rng.normal(size=(4, 8)), 2), path)
    raw = path.read_bytes()
    (tmp_path / "magic").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError, match="magic"):
        load_model(tmp_path / "magic")
    (tmp_path / "short").write_bytes(raw[:-3])
    with pytest.raises(FormatError, match="offset"):
        load_model(tmp_path / "short")
    (tmp_path / "tiny").write_bytes(raw[:10])
    with pytest.raises(FormatError):
        load_model(tmp_path / "tiny")
    (tmp_path / "version").write_bytes(raw[:4] + b"\x09\x00" + raw[6:])
    with pytest.raises(FormatError, match="version"):
        load_model(tmp_path / "version")


def test_size_formula_example():
    assert quant_payload_size(1000, 64, 2) == 28000
    assert compression_ratio(64, 2) == pytest.approx(256 / 28)


@pytest.mark.parametrize("d", [64, 128, 256])
def test_ratio_at_least_eight(d):
    assert compression_ratio(d, 2) >= 8
