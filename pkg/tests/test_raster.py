import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pixhom.errors import BoundsError, DataError, FormatError, TruncationError
from pixhom.raster import (DEFAULT_K, MAGIC, FilterLevel, Raster, apply_background_mask, crop,
                           estimate_threshold, foreground_count, read_raster, scaled_threshold,
                           write_raster)

finite32 = st.floats(-1e6, 1e6, allow_nan=False, width=32)


def raster_arrays(max_side=12):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float32, s, elements=finite32))


def test_from_list_row_major():
    r = Raster.from_list(3, 2, [1, 2, 3, 4, 5, 6])
    assert r.shape == (2, 3)
    assert r.values[1, 0] == 4
    assert r.rc(4) == (1, 1)


def test_rejects_non_finite():
    with pytest.raises(DataError):
        Raster(np.array([[1.0, np.nan]], dtype=np.float32))


def test_values_read_only():
    r = Raster.from_list(2, 1, [1, 2])
    with pytest.raises(ValueError):
        r.values[0, 0] = 5


@given(raster_arrays())
def test_round_trip_bit_exact(tmp_path_factory, a):
    path = tmp_path_factory.mktemp("rt") / "x.pxh"
    write_raster(Raster(a), path)
    back = read_raster(path)
    assert back.values.tobytes() == a.tobytes()


def test_header_layout(tmp_path):
    path = tmp_path / "h.pxh"
    write_raster(Raster.from_list(3, 2, range(6)), path)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert struct.unpack("<II", raw[4:12]) == (3, 2)
    assert len(raw) == 12 + 4 * 6


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.pxh"
    path.write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + b"\0" * 4)
    with pytest.raises(FormatError):
        read_raster(path)


def test_truncated(tmp_path):
    path = tmp_path / "t.pxh"
    path.write_bytes(MAGIC + struct.pack("<II", 4, 4) + b"\0" * 10)
    with pytest.raises(TruncationError):
        read_raster(path)


def test_nan_payload(tmp_path):
    path = tmp_path / "n.pxh"
    path.write_bytes(MAGIC + struct.pack("<II", 1, 1) + np.float32(np.nan).tobytes())
    with pytest.raises(DataError):
        read_raster(path)


def test_threshold_constant_image_falls_back_to_median():
    r = Raster(np.full((4, 4), 3.0, dtype=np.float32))
    assert estimate_threshold(r) == 3.0


def test_threshold_formula():
    r = Raster.from_list(5, 1, [1, 2, 3, 4, 100])
    # median 3, MAD 1
    assert estimate_threshold(r, 2.0) == pytest.approx(3 + 2 * 1.4826)
    assert estimate_threshold(r) == pytest.approx(3 + DEFAULT_K * 1.4826)


@given(raster_arrays(), st.integers(0, 2**32 - 1))
def test_threshold_permutation_invariant(a, seed):
    perm = np.random.default_rng(seed).permutation(a.ravel()).reshape(a.shape)
    assert estimate_threshold(Raster(a)) == estimate_threshold(Raster(perm))


@given(raster_arrays(), finite32, finite32)
def test_masking_monotone(a, t1, t2):
    lo, hi = sorted((t1, t2))
    r = Raster(a)
    m_lo, m_hi = apply_background_mask(r, lo), apply_background_mask(r, hi)
    assert not np.any(m_lo.is_background & ~m_hi.is_background)
    assert m_lo.dropped_fraction <= m_hi.dropped_fraction


@given(st.floats(0.0, 1e6, allow_nan=False))
def test_scaled_threshold_ordering(t):
    light = scaled_threshold(t, "light")
    std = scaled_threshold(t, "filter_std")
    heavy = scaled_threshold(t, FilterLevel.HEAVY)
    assert scaled_threshold(t, "vanilla") == -np.inf
    assert light <= std <= heavy


def test_mask_example():
    r = Raster.from_list(5, 1, [1, 5, 2, 4, 3])
    m = apply_background_mask(r, 2.5)
    assert m.is_background.tolist() == [[True, False, True, False, False]]
    assert m.dropped_fraction == pytest.approx(0.4)
    assert m.foreground_count == 3


def test_foreground_count_streams(tmp_path):
    r = Raster.from_list(5, 1, [1, 5, 2, 4, 3])
    path = tmp_path / "a.pxh"
    write_raster(r, path)
    assert foreground_count(path, 2.5) == 3
    assert foreground_count(path, -np.inf) == 5


def test_crop():
    r = Raster(np.arange(20, dtype=np.float32).reshape(4, 5))
    c = crop(r, 1, 2, 2, 3)
    assert c.values.tolist() == [[7, 8, 9], [12, 13, 14]]
    with pytest.raises(BoundsError):
        crop(r, 3, 0, 2, 1)
    with pytest.raises(BoundsError):
        crop(r, 0, 0, 0, 1)


def test_filter_level_parse():
    assert FilterLevel.parse("filter_heavy") is FilterLevel.HEAVY
    with pytest.raises(ValueError):
        FilterLevel.parse("extreme")


def test_threshold_examples():
    assert estimate_threshold(Raster.from_list(5, 1, [1, 2, 3, 4, 5]), 0.0) == 3.0
    assert estimate_threshold(Raster.from_list(5, 1, [0, 0, 0, 0, 10]), 2.0) == 0.0
