"""Synthetic astronomical frames: sky background, read noise and Gaussian stars."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .raster import Raster, write_raster

PSF_TRUNCATION = 4.0


@dataclass(frozen=True)
class SceneConfig:
    """Star-field parameters.  The defaults give the desk-scale 512x512 scene whose
    source density (~3.4e-3 per pixel) matches a 10k x 10k frame with 340k objects."""

    width: int = 512
    height: int = 512
    n_stars: int = 900
    sky_level: float = 100.0
    read_noise_sigma: float = 5.0
    psf_sigma: float = 1.5
    flux_min: float = 50.0
    flux_max: float = 5000.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be positive")
        if self.n_stars < 0:
            raise ValueError("n_stars must be >= 0")
        if self.sky_level < 0 or self.read_noise_sigma < 0:
            raise ValueError("sky_level and read_noise_sigma must be >= 0")
        if self.psf_sigma <= 0 or self.flux_min <= 0 or self.flux_max < self.flux_min:
            raise ValueError("need psf_sigma > 0 and 0 < flux_min <= flux_max")

    def with_seed(self, seed: int) -> "SceneConfig":
        return replace(self, seed=seed)


def generate_image(c: SceneConfig) -> Raster:
    rng = np.random.default_rng(c.seed)
    img = np.zeros((c.height, c.width), dtype=np.float64)
    img += c.sky_level
    img += rng.normal(0.0, c.read_noise_sigma, size=img.shape)

    xs = rng.uniform(0.0, c.width, size=c.n_stars)
    ys = rng.uniform(0.0, c.height, size=c.n_stars)
    amps = np.exp(rng.uniform(math.log(c.flux_min), math.log(c.flux_max), size=c.n_stars))

    radius = PSF_TRUNCATION * c.psf_sigma
    half = int(math.ceil(radius))
    for x0, y0, amp in zip(xs, ys, amps):
        r0, r1 = max(int(y0) - half, 0), min(int(y0) + half + 1, c.height)
        c0, c1 = max(int(x0) - half, 0), min(int(x0) + half + 1, c.width)
        yy, xx = np.mgrid[r0:r1, c0:c1]
        d2 = (xx + 0.5 - x0) ** 2 + (yy + 0.5 - y0) ** 2
        stamp = amp * np.exp(-d2 / (2.0 * c.psf_sigma ** 2))
        stamp[d2 > radius * radius] = 0.0
        img[r0:r1, c0:c1] += stamp
    return Raster(img.astype(np.float32))


def generate_dataset(c: SceneConfig, count: int, directory, manifest_name: str = "manifest.txt") -> Path:
    """Write ``count`` PXH frames (seed + index) and a manifest listing them.

    Manifest entries are file names relative to the manifest's own directory.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(count):
        name = f"img_{i:04d}.pxh"
        write_raster(generate_image(c.with_seed(c.seed + i)), directory / name)
        names.append(name)
    manifest = directory / manifest_name
    manifest.write_text("".join(f"{n}\n" for n in names), encoding="utf-8")
    return manifest


def read_manifest(path) -> list[Path]:
    """Paths listed in a manifest; relative entries resolve against the manifest directory."""
    path = Path(path)
    base = path.parent
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            p = Path(line)
            out.append(p if p.is_absolute() else base / p)
    return out


def dataset_bytes(c: SceneConfig, count: int) -> int:
    return count * (12 + 4 * c.width * c.height)

