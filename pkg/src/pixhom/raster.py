"""Grayscale raster container, PXH file I/O, background thresholding and cropping.

PXH layout (little-endian)::

    bytes 0-3    magic b"PXHI"
    bytes 4-7    width  (uint32)
    bytes 8-11   height (uint32)
    bytes 12-    width*height float32 values, row-major, top row first
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, DataError, FormatError, TruncationError

MAGIC = b"PXHI"
HEADER = struct.Struct("<4sII")

# Robust sky estimate: t = median + k * 1.4826 * MAD.  A negative k puts the
# threshold below the sky level so only the faint tail is treated as background.
DEFAULT_K = -1.5
MAD_TO_SIGMA = 1.4826


@dataclass(frozen=True)
class Raster:
    """Immutable ``height x width`` float32 image.

    ``values`` is stored as a read-only C-contiguous 2D array; ``values.ravel()``
    gives the row-major sequence where ``linear = row * width + col``.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"raster must be a non-empty 2D array, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.isfinite(arr).all():
            raise DataError("raster contains NaN or infinite values")
        if arr.flags.writeable:
            arr = arr.copy() if arr is self.values else arr
            arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_list(cls, width: int, height: int, values) -> "Raster":
        arr = np.asarray(values, dtype=np.float32)
        if arr.size != width * height:
            raise ValueError(f"expected {width * height} values, got {arr.size}")
        return cls(arr.reshape(height, width))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def rc(self, linear):
        """Row/column of a linear pixel index (scalar or array)."""
        if np.ndim(linear) == 0:
            return divmod(int(linear), self.width)
        return np.divmod(linear, self.width)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(
            self.values.view(np.uint32), other.values.view(np.uint32)
        )

    __hash__ = None


def as_raster(r) -> Raster:
    return r if isinstance(r, Raster) else Raster(np.asarray(r, dtype=np.float32))


def write_raster(r: Raster, path) -> None:
    payload = np.ascontiguousarray(r.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, r.width, r.height))
        fh.write(payload.tobytes())


def read_raster(path) -> Raster:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise FormatError(f"{path}: file too short for PXH header")
        magic, width, height = HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if width == 0 or height == 0:
            raise FormatError(f"{path}: zero-sized raster {width}x{height}")
        expected = width * height * 4
        payload = fh.read(expected)
        if len(payload) < expected:
            raise TruncationError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(height, width)
    if not np.isfinite(arr).all():
        raise DataError(f"{path}: non-finite pixel value")
    arr.flags.writeable = False
    return Raster(arr)


def foreground_count(path, threshold: float) -> int:
    """Number of pixels >= threshold, read in row chunks without keeping the image."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise FormatError(f"{path}: file too short for PXH header")
        magic, width, height = HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        remaining = width * height
        count = 0
        chunk = max(width, 1 << 16)
        while remaining:
            n = min(chunk, remaining)
            buf = fh.read(n * 4)
            if len(buf) < n * 4:
                raise TruncationError(f"{path}: truncated payload")
            count += int(np.count_nonzero(np.frombuffer(buf, dtype="<f4") >= threshold))
            remaining -= n
    return count


def estimate_threshold(r: Raster, k: float = DEFAULT_K) -> float:
    vals = r.flat().astype(np.float64)
    med = float(np.median(vals))
    mad = float(np.median(np.abs(vals - med)))
    if mad == 0.0:
        return med
    return med + k * MAD_TO_SIGMA * mad


class FilterLevel(str, enum.Enum):
    VANILLA = "vanilla"
    LIGHT = "light"
    STD = "std"
    HEAVY = "heavy"

    @classmethod
    def parse(cls, name) -> "FilterLevel":
        if isinstance(name, cls):
            return name
        key = str(name).lower()
        if key.startswith("filter_"):
            key = key[len("filter_"):]
        return cls(key)


_SCALE = {FilterLevel.LIGHT: 0.3, FilterLevel.STD: 1.0, FilterLevel.HEAVY: 1.3}


def scaled_threshold(t: float, level) -> float:
    level = FilterLevel.parse(level)
    if level is FilterLevel.VANILLA:
        return -np.inf
    return _SCALE[level] * t


@dataclass(frozen=True)
class BackgroundMask:
    threshold: float
    is_background: np.ndarray

    @property
    def dropped_fraction(self) -> float:
        return float(np.count_nonzero(self.is_background)) / self.is_background.size

    @property
    def foreground_count(self) -> int:
        return int(self.is_background.size - np.count_nonzero(self.is_background))


def apply_background_mask(r: Raster, t: float) -> BackgroundMask:
    bg = r.values < t
    bg.flags.writeable = False
    return BackgroundMask(float(t), bg)


def crop(r: Raster, row0: int, col0: int, h: int, w: int) -> Raster:
    if h < 1 or w < 1 or row0 < 0 or col0 < 0 or row0 + h > r.height or col0 + w > r.width:
        raise BoundsError(
            f"crop ({row0},{col0},{h},{w}) outside raster {r.height}x{r.width}"
        )
    out = r.values[row0:row0 + h, col0:col0 + w].copy()
    out.flags.writeable = False
    return Raster(out)
