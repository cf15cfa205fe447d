"""Explicit bookkeeping of the working arrays allocated by ``compute_ph``.

Every array the engine creates goes through :class:`MemoryAccountant`, so the
reported peak is a portable, platform-independent number (no RSS sampling).
"""
from __future__ import annotations

import numpy as np


class MemoryAccountant:
    def __init__(self, image_pixels: int = 0):
        self.image_pixels = image_pixels
        self.current = 0
        self.peak = 0
        self.full_arrays = 0
        self.peak_full_arrays = 0
        self._live: dict[str, tuple[int, bool]] = {}

    def _add(self, name, arr):
        if name in self._live:
            raise KeyError(f"array {name!r} already accounted")
        full = self.image_pixels > 0 and arr.size == self.image_pixels
        self._live[name] = (arr.nbytes, full)
        self.current += arr.nbytes
        self.full_arrays += full
        self.peak = max(self.peak, self.current)
        self.peak_full_arrays = max(self.peak_full_arrays, self.full_arrays)
        return arr

    def empty(self, name, shape, dtype):
        return self._add(name, np.empty(shape, dtype=dtype))

    def full(self, name, shape, fill, dtype):
        return self._add(name, np.full(shape, fill, dtype=dtype))

    def adopt(self, name, arr):
        """Account for an array produced by a numpy call."""
        return self._add(name, arr)

    def release(self, *names):
        for name in names:
            nbytes, full = self._live.pop(name)
            self.current -= nbytes
            self.full_arrays -= full

    def peak_per_pixel(self) -> float:
        return self.peak / self.image_pixels if self.image_pixels else float("nan")

    def live(self) -> list[str]:
        return list(self._live)
