"""PixHomology: fast 0-dimensional persistent homology of 2D images, with a
union-find oracle, bottleneck distance and a multi-worker batch pipeline."""

__version__ = "0.1.0"

from .diagram import PersistenceDiagram, PersistencePair, read_diagram_csv, write_diagram_csv
from .metrics import bottleneck_distance
from .oracle import oracle_ph
from .phcore import compute_ph, jitter, validate_input
from .raster import (BackgroundMask, FilterLevel, Raster, apply_background_mask, crop,
                     estimate_threshold, read_raster, scaled_threshold, write_raster)

__all__ = [
    "BackgroundMask", "FilterLevel", "PersistenceDiagram", "PersistencePair", "Raster",
    "apply_background_mask", "bottleneck_distance", "compute_ph", "crop", "estimate_threshold",
    "jitter", "oracle_ph", "read_diagram_csv", "read_raster", "scaled_threshold",
    "validate_input", "write_diagram_csv", "write_raster",
]
