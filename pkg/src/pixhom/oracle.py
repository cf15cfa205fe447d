"""Brute-force 0-dimensional persistence by a descending union-find sweep.

Deliberately written without numba or any code shared with :mod:`phcore`, so that
agreement between the two is evidence rather than tautology.
"""
from __future__ import annotations

import numpy as np

from .diagram import PersistenceDiagram
from .errors import PreconditionError
from .raster import BackgroundMask, as_raster


def oracle_ph(r, mask: BackgroundMask | None = None, allow_ties: bool = False) -> PersistenceDiagram:
    """Persistence by sweeping foreground pixels from high to low value.

    Equal values are refused unless ``allow_ties``; then pixels are ordered by
    (value descending, index ascending) and an earlier pixel counts as higher.
    """
    r = as_raster(r)
    h, w = r.shape
    vals = r.flat().tolist()
    fg = [True] * len(vals) if mask is None else (~mask.is_background.reshape(-1)).tolist()
    pixels = [i for i in range(len(vals)) if fg[i]]
    fg_vals = [vals[i] for i in pixels]
    if not allow_ties and len(set(fg_vals)) != len(fg_vals):
        raise PreconditionError("oracle requires pairwise-distinct foreground values")

    pixels.sort(key=lambda i: (-vals[i], i))
    parent: dict[int, int] = {}
    # per root: birth pixel (the eldest maximum) and lowest pixel seen so far
    birth = {}
    lowest = {}
    pairs = []

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for p in pixels:
        row, col = divmod(p, w)
        roots = set()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = row + dr, col + dc
                if (dr or dc) and 0 <= rr < h and 0 <= cc < w:
                    q = rr * w + cc
                    if q in parent:
                        roots.add(find(q))
        parent[p] = p
        if not roots:
            birth[p] = p
            lowest[p] = p
            continue
        eldest = max(roots, key=lambda s: (vals[birth[s]], -birth[s]))
        for s in roots:
            if s != eldest:
                pairs.append((vals[birth[s]], vals[p], birth[s], p, False))
                parent[s] = eldest
        parent[p] = eldest
        lowest[eldest] = p

    for s in {find(p) for p in parent}:
        pairs.append((vals[birth[s]], vals[lowest[s]], birth[s], lowest[s], True))
    return PersistenceDiagram.from_pairs(pairs, width=w)


def count_local_maxima(r, mask: BackgroundMask | None = None) -> int:
    """Pixels strictly greater than every foreground 8-neighbour."""
    r = as_raster(r)
    v = r.values.astype(np.float64)
    if mask is not None:
        v = np.where(mask.is_background, -np.inf, v)
    h, w = v.shape
    padded = np.full((h + 2, w + 2), -np.inf)
    padded[1:-1, 1:-1] = v
    is_max = np.isfinite(v)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            if (dr, dc) != (1, 1):
                is_max &= padded[dr:dr + h, dc:dc + w] < v
    return int(is_max.sum())
