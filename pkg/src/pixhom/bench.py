"""Crop-size sweep: run time and accounted working memory of ``compute_ph``."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .datagen import SceneConfig, generate_image
from .memory import MemoryAccountant
from .phcore import compute_ph
from .raster import crop


@dataclass(frozen=True)
class BenchRow:
    side: int
    pixels: int
    seconds: float
    peak_bytes: int

    @property
    def bytes_per_pixel(self) -> float:
        return self.peak_bytes / self.pixels


def crop_sides(min_side: int, max_side: int, factor: float = 2.0) -> list[int]:
    if min_side < 1 or max_side < min_side or factor <= 1:
        raise ValueError("need 1 <= min_side <= max_side and factor > 1")
    sides = []
    s = float(min_side)
    while round(s) <= max_side:
        if not sides or round(s) != sides[-1]:
            sides.append(int(round(s)))
        s *= factor
    if sides[-1] != max_side:
        sides.append(max_side)
    return sides


def crop_benchmark(max_side: int = 2048, min_side: int = 20, factor: float = 2.0,
                   repeats: int = 3, seed: int = 0, scene: SceneConfig | None = None) -> list[BenchRow]:
    """Random crops of one generated frame, one per size; time is the best of ``repeats``."""
    sides = crop_sides(min_side, max_side, factor)
    if scene is None:
        density = SceneConfig().n_stars / (512 * 512)
        scene = SceneConfig(width=max_side, height=max_side,
                            n_stars=int(round(density * max_side * max_side)), seed=seed)
    frame = generate_image(scene)
    rng = np.random.default_rng(seed)
    compute_ph(crop(frame, 0, 0, min(8, frame.height), min(8, frame.width)))  # warm the JIT cache
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for side in sides:
            r0 = int(rng.integers(0, frame.height - side + 1))
            c0 = int(rng.integers(0, frame.width - side + 1))
            img = crop(frame, r0, c0, side, side)
            best = float("inf")
            peak = 0
            for _ in range(max(1, repeats)):
                acct = MemoryAccountant(img.size)
                t0 = time.perf_counter()
                compute_ph(img, accountant=acct)
                best = min(best, time.perf_counter() - t0)
                peak = max(peak, acct.peak)
            rows.append(BenchRow(side, img.size, best, peak))
    return rows


def loglog_fit(x, y) -> tuple[float, float]:
    """Slope and R^2 of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, icept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
