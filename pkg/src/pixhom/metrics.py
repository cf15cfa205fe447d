"""Bottleneck distance between persistence diagrams.

Finite points match each other at L-infinity cost or the diagonal at half their
persistence.  Essential points are matched only among themselves, by birth.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .diagram import PersistenceDiagram
from .errors import ConventionError


def _convention(d: PersistenceDiagram) -> int:
    """+1 superlevel (birth >= death), -1 sublevel, 0 undetermined (empty / all diagonal)."""
    up = bool(np.any(d.birth > d.death))
    down = bool(np.any(d.birth < d.death))
    if up and down:
        raise ConventionError("diagram mixes birth > death and birth < death points")
    return 1 if up else -1 if down else 0


def _split(d: PersistenceDiagram, sign: float):
    pts = d.finite() * sign
    return pts, np.sort(d.essential_births() * sign)


def _linf(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(a[:, None, 0] - b[None, :, 0]), np.abs(a[:, None, 1] - b[None, :, 1]))


def _covers(adj: np.ndarray) -> bool:
    """True if the boolean bipartite graph has a matching saturating every row."""
    if adj.shape[0] == 0:
        return True
    if adj.shape[1] < adj.shape[0]:
        return False
    match = maximum_bipartite_matching(csr_matrix(adj), perm_type="column")
    return bool(np.all(match >= 0))


def _feasible(c, cost, gap_a, gap_b) -> bool:
    # Points with gap > c cannot go to the diagonal.  A matching covering both
    # forced sets exists iff each forced set can be covered on its own
    # (Mendelsohn-Dulmage), so two one-sided matchings decide feasibility.
    edges = cost <= c
    forced_a = gap_a > c
    forced_b = gap_b > c
    return _covers(edges[forced_a]) and _covers(edges[:, forced_b].T)


def finite_bottleneck(a: np.ndarray, b: np.ndarray) -> float:
    """Bottleneck distance between two (k, 2) arrays of finite (birth, death) points."""
    gap_a = np.abs(a[:, 0] - a[:, 1]) / 2 if len(a) else np.zeros(0)
    gap_b = np.abs(b[:, 0] - b[:, 1]) / 2 if len(b) else np.zeros(0)
    cost = _linf(a, b) if len(a) and len(b) else np.zeros((len(a), len(b)))
    candidates = np.unique(np.concatenate([[0.0], gap_a, gap_b, cost.ravel()]))
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(candidates[mid], cost, gap_a, gap_b):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def essential_bottleneck(a: np.ndarray, b: np.ndarray) -> float:
    """Matching of essential classes by birth; sorted order is optimal in 1D."""
    if len(a) != len(b):
        return float("inf")
    if len(a) == 0:
        return 0.0
    return float(np.max(np.abs(np.sort(a) - np.sort(b))))


def bottleneck_distance(d1: PersistenceDiagram, d2: PersistenceDiagram) -> float:
    c1, c2 = _convention(d1), _convention(d2)
    if c1 and c2 and c1 != c2:
        raise ConventionError("diagrams use opposite sign conventions")
    sign = -1.0 if (c1 or c2) < 0 else 1.0
    f1, e1 = _split(d1, sign)
    f2, e2 = _split(d2, sign)
    return max(essential_bottleneck(e1, e2), finite_bottleneck(f1, f2))


def brute_force_bottleneck(a, b) -> float:
    """Exhaustive search over all partial matchings; each unmatched point goes to the diagonal.

    Exponential; intended for diagrams with at most ~6 points.
    """
    a = [tuple(p) for p in np.asarray(a, dtype=np.float64).reshape(-1, 2)]
    b = [tuple(p) for p in np.asarray(b, dtype=np.float64).reshape(-1, 2)]
    best = float("inf")

    def gap(p):
        return abs(p[0] - p[1]) / 2

    def rec(i, used, worst):
        nonlocal best
        if worst >= best:
            return
        if i == len(a):
            rest = max((gap(b[j]) for j in range(len(b)) if not used[j]), default=0.0)
            best = min(best, max(worst, rest))
            return
        rec(i + 1, used, max(worst, gap(a[i])))
        for j in range(len(b)):
            if not used[j]:
                used[j] = True
                cost = max(abs(a[i][0] - b[j][0]), abs(a[i][1] - b[j][1]))
                rec(i + 1, used, max(worst, cost))
                used[j] = False

    rec(0, [False] * len(b), 0.0)
    return best
