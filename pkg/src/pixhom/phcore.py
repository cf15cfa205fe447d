"""PixHomology: 0-dimensional persistence of the superlevel filtration of a 2D image.

The engine runs six steps:

1. steepest-ascent field (3x3 arg-max pooling) collapsed to its roots,
2. roots become births; components are relabelled by ascending birth value,
3. pixels whose 3x3 window sees two labels become death candidates,
4. candidates that cannot join components are optionally dropped,
5. candidates are swept in descending value order and merge components with a
   union-find table whose representative is always the eldest label,
6. every component is paired with its death; survivors die at their region minimum.

Pixels are totally ordered by (value descending, linear index ascending).  A
neighbour "is present" at pixel x when it precedes x in that order; only present
neighbours take part in a merge at x, which makes the sweep coincide with the
elder-rule union-find on the 8-connected grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .diagram import PersistenceDiagram
from .errors import ConsistencyError, PreconditionError
from .memory import MemoryAccountant
from .raster import BackgroundMask, Raster, as_raster

_NO_MASK = np.zeros(0, dtype=np.bool_)

# Ring of the 8 neighbours (TL, T, TR, R, BR, B, BL, L) and their 8-adjacency.
_RING_DR = np.array([-1, -1, -1, 0, 1, 1, 1, 0], dtype=np.int64)
_RING_DC = np.array([-1, 0, 1, 1, 1, 0, -1, -1], dtype=np.int64)
_RING_ADJ = np.zeros((8, 8), dtype=np.bool_)
for _a in range(8):
    for _b in range(8):
        if _a != _b:
            _RING_ADJ[_a, _b] = max(abs(_RING_DR[_a] - _RING_DR[_b]), abs(_RING_DC[_a] - _RING_DC[_b])) == 1
# Opposite ring slots for the four axes: horizontal, vertical, main and anti diagonal.
_AXES = np.array([[7, 3], [1, 5], [0, 4], [2, 6]], dtype=np.int64)

_U32 = np.uint64(0xFFFFFFFF)
_SIGN = np.uint64(0x80000000)
_SHIFT = np.uint64(32)


# --------------------------------------------------------------------------- kernels


@njit(cache=True)
def _argmax_kernel(vals, h, w, out):
    """Background pixels carry -inf in ``vals`` and get -1; a finite pixel always beats them."""
    ninf = -np.inf
    for r in range(h):
        for c in range(w):
            i = r * w + c
            if vals[i] == ninf:
                out[i] = -1
                continue
            best = -1
            bestv = ninf
            for rr in range(max(r - 1, 0), min(r + 2, h)):
                for cc in range(max(c - 1, 0), min(c + 2, w)):
                    j = rr * w + cc
                    if best < 0 or vals[j] > bestv:
                        best = j
                        bestv = vals[j]
            out[i] = best


@njit(cache=True)
def _fill_background(vals, bg, out):
    ninf = np.float32(-np.inf)
    for i in range(vals.size):
        out[i] = ninf if bg[i] else vals[i]


@njit(cache=True)
def _count_fixpoints(f):
    n = 0
    for i in range(f.size):
        if f[i] == i:
            n += 1
    return n


@njit(cache=True)
def _resolve_kernel(f, max_sweeps):
    """Pointer doubling in place.  Returns sweeps used, or a negative error code."""
    roots_before = _count_fixpoints(f)
    sweeps = 0
    while True:
        changed = False
        for i in range(f.size):
            p = f[i]
            if p < 0:
                continue
            q = f[p]
            if q < 0:
                return -3
            if q != p:
                f[i] = q
                changed = True
        if not changed:
            break
        sweeps += 1
        if sweeps > max_sweeps:
            return -1
    if _count_fixpoints(f) != roots_before:
        return -2
    return sweeps


@njit(cache=True)
def _collect_fixpoints(f, out):
    k = 0
    for i in range(f.size):
        if f[i] == i:
            out[k] = i
            k += 1


@njit(cache=True)
def _float_key(bits):
    # Order-preserving map from float32 bits to uint32 (as uint64); -0.0 folds onto +0.0.
    b = np.uint64(bits)
    if b == _SIGN:
        b = np.uint64(0)
    if b & _SIGN:
        return _U32 ^ b
    return b | _SIGN


@njit(cache=True)
def _keys_ascending(vbits, buf, n):
    """buf[:n] holds pixel indices; rewrite as keys sorting by (value asc, index desc)."""
    for t in range(n):
        x = buf[t]
        buf[t] = (_float_key(vbits[x]) << _SHIFT) | (_U32 - x)


@njit(cache=True)
def _decode_ascending(buf, n):
    for t in range(n):
        buf[t] = _U32 - (buf[t] & _U32)


@njit(cache=True)
def _keys_descending(vbits, buf, n):
    """buf[:n] holds pixel indices; rewrite as keys sorting by (value desc, index asc)."""
    for t in range(n):
        x = buf[t]
        buf[t] = ((_U32 - _float_key(vbits[x])) << _SHIFT) | x


@njit(cache=True)
def _adjacent_key_ties(keys, n):
    ties = 0
    for t in range(1, n):
        if (keys[t] >> _SHIFT) == (keys[t - 1] >> _SHIFT):
            ties += 1
    return ties


@njit(cache=True)
def _iota(a):
    for i in range(a.size):
        a[i] = i


@njit(cache=True)
def _assign_labels(f, sorted_roots, labels):
    for k in range(sorted_roots.size):
        labels[sorted_roots[k]] = k
    for i in range(f.size):
        p = f[i]
        labels[i] = -1 if p < 0 else labels[p]


@njit(cache=True)
def _edge_scan(labels, h, w, out, fill):
    count = 0
    for r in range(h):
        for c in range(w):
            i = r * w + c
            li = labels[i]
            if li < 0:
                continue
            lo = li
            hi = li
            for rr in range(max(r - 1, 0), min(r + 2, h)):
                for cc in range(max(c - 1, 0), min(c + 2, w)):
                    lj = labels[rr * w + cc]
                    if lj < 0:
                        continue
                    if lj < lo:
                        lo = lj
                    if lj > hi:
                        hi = lj
            if lo != hi:
                if fill:
                    out[count] = i
                count += 1
    return count


@njit(cache=True)
def _precedes(vals, j, x):
    return vals[j] > vals[x] or (vals[j] == vals[x] and j < x)


@njit(cache=True)
def _keep_candidate(vals, h, w, bg, has_mask, x, present, ring_adj, axes, ring_dr, ring_dc, stack):
    r = x // w
    c = x - r * w
    v = vals[x]
    local_min = True
    n_higher = 0
    # present: 0 absent, 1 neighbour lower-or-equal-later, 2 neighbour precedes x
    for k in range(8):
        rr = r + ring_dr[k]
        cc = c + ring_dc[k]
        if rr < 0 or rr >= h or cc < 0 or cc >= w:
            present[k] = 0
            continue
        j = rr * w + cc
        if has_mask and bg[j]:
            present[k] = 0
            continue
        if vals[j] < v:
            local_min = False
        if _precedes(vals, j, x):
            present[k] = 2
            n_higher += 1
        else:
            present[k] = 1
    if local_min:
        return True
    # axis saddle: minimum along one full axis and maximum along a different one
    for a in range(4):
        for b in range(4):
            if a == b:
                continue
            ok = True
            for s in range(2):
                if present[axes[a, s]] == 0 or present[axes[b, s]] == 0:
                    ok = False
            if not ok:
                continue
            for s in range(2):
                k = axes[a, s]
                if vals[(r + ring_dr[k]) * w + c + ring_dc[k]] < v:
                    ok = False
                k = axes[b, s]
                if vals[(r + ring_dr[k]) * w + c + ring_dc[k]] > v:
                    ok = False
            if ok:
                return True
    # split point: preceding neighbours form at least two 8-connected groups
    if n_higher < 2:
        return False
    start = -1
    for k in range(8):
        if present[k] == 2:
            start = k
            break
    # flood the group containing `start`; present 2 -> 3 once reached
    top = 0
    stack[top] = start
    top += 1
    present[start] = 3
    reached = 1
    while top > 0:
        top -= 1
        a = stack[top]
        for b in range(8):
            if present[b] == 2 and ring_adj[a, b]:
                present[b] = 3
                stack[top] = b
                top += 1
                reached += 1
    return reached < n_higher


@njit(cache=True)
def _distill_kernel(vals, h, w, bg, has_mask, buf, n, ring_adj, axes, ring_dr, ring_dc):
    present = np.zeros(8, dtype=np.int64)
    stack = np.zeros(8, dtype=np.int64)
    k = 0
    for t in range(n):
        x = np.int64(buf[t])
        if _keep_candidate(vals, h, w, bg, has_mask, x, present, ring_adj, axes, ring_dr, ring_dc, stack):
            buf[k] = buf[t]
            k += 1
    return k


@njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def _merge_kernel(keys, n, vals, labels, h, w, parent, death_val, death_pix):
    reps = np.empty(9, dtype=np.int64)
    merges = 0
    for t in range(n):
        x = np.int64(keys[t] & _U32)
        r = x // w
        c = x - r * w
        ns = 0
        reps[ns] = _find(parent, labels[x])
        ns += 1
        for rr in range(max(r - 1, 0), min(r + 2, h)):
            for cc in range(max(c - 1, 0), min(c + 2, w)):
                j = rr * w + cc
                if j == x or labels[j] < 0 or not _precedes(vals, j, x):
                    continue
                rep = _find(parent, labels[j])
                seen = False
                for s in range(ns):
                    if reps[s] == rep:
                        seen = True
                        break
                if not seen:
                    reps[ns] = rep
                    ns += 1
        if ns < 2:
            continue
        survivor = reps[0]
        for s in range(1, ns):
            if reps[s] > survivor:
                survivor = reps[s]
        for s in range(ns):
            p = reps[s]
            if p != survivor:
                parent[p] = survivor
                death_val[p] = vals[x]
                death_pix[p] = x
                merges += 1
    return merges


@njit(cache=True)
def _region_minima(vals, labels, parent, min_val, min_pix):
    for i in range(labels.size):
        lab = labels[i]
        if lab < 0:
            continue
        root = _find(parent, lab)
        v = vals[i]
        m = min_pix[root]
        if m < 0 or v <= min_val[root]:
            min_val[root] = v
            min_pix[root] = i


@njit(cache=True)
def _emit(roots_sorted, vals, parent, death_val, death_pix, min_val, min_pix,
          birth, death, bpix, dpix, ess):
    """Fill output columns in descending label order; returns -1 or the bad label."""
    k_total = roots_sorted.size
    for out in range(k_total):
        k = k_total - 1 - out
        root = roots_sorted[k]
        birth[out] = vals[root]
        bpix[out] = root
        if death_pix[k] >= 0:
            death[out] = death_val[k]
            dpix[out] = death_pix[k]
            ess[out] = False
        elif parent[k] == k and min_pix[k] >= 0:
            death[out] = min_val[k]
            dpix[out] = min_pix[k]
            ess[out] = True
        else:
            return k
    return -1


# --------------------------------------------------------------------------- step API


def _bg_flat(mask: BackgroundMask | None, r: Raster):
    if mask is None:
        return _NO_MASK, False
    bg = np.ascontiguousarray(mask.is_background).reshape(-1)
    if bg.size != r.size:
        raise ValueError("mask shape does not match raster")
    return bg, True


def maxpool2d(r) -> Raster:
    """3x3 max pooling, stride 1, out-of-image positions count as -inf."""
    r = as_raster(r)
    h, w = r.shape
    padded = np.full((h + 2, w + 2), -np.inf, dtype=np.float32)
    padded[1:-1, 1:-1] = r.values
    out = padded[1:-1, 1:-1].copy()
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            np.maximum(out, padded[dr:dr + h, dc:dc + w], out=out)
    return Raster(out)


def arg_maxpool2d(r, mask: BackgroundMask | None = None) -> np.ndarray:
    """Linear index of the 3x3 window maximum per pixel; smallest index wins ties.

    Background pixels (when ``mask`` is given) get -1 and are never selected.
    """
    r = as_raster(r)
    bg, has_mask = _bg_flat(mask, r)
    vals = r.flat()
    if has_mask:
        vals = np.empty(r.size, dtype=np.float32)
        _fill_background(r.flat(), bg, vals)
    out = np.empty(r.size, dtype=np.int64)
    _argmax_kernel(vals, r.height, r.width, out)
    return out.reshape(r.shape)


def max_sweeps(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


def _resolve_in_place(flat: np.ndarray) -> int:
    sweeps = _resolve_kernel(flat, max_sweeps(flat.size) + 1)
    if sweeps == -3:
        raise PreconditionError("field points into background")
    if sweeps < 0:
        raise PreconditionError("arg-max field contains a cycle; input has plateau maxima")
    return sweeps


def resolve_roots(m: np.ndarray) -> np.ndarray:
    """Collapse every chain of the arg-max field onto its fixpoint."""
    out = np.array(m, dtype=np.int64, copy=True)
    _resolve_in_place(out.reshape(-1))
    return out


@dataclass(frozen=True)
class BirthTable:
    """Births in ascending order: entry k is the maximum of component label k."""

    values: np.ndarray
    pixels: np.ndarray
    ties: int = 0

    def descending(self) -> list[tuple[float, int]]:
        return [(float(v), int(p)) for v, p in zip(self.values[::-1], self.pixels[::-1])]

    def __len__(self):
        return len(self.values)


def _sorted_roots(field_flat, vals, acct: MemoryAccountant):
    k = _count_fixpoints(field_flat)
    roots = acct.empty("roots", k, np.uint64)
    _collect_fixpoints(field_flat, roots)
    _keys_ascending(vals.view(np.uint32), roots, k)
    roots.sort()
    ties = _adjacent_key_ties(roots, k)
    _decode_ascending(roots, k)
    return roots.view(np.int64), ties


def detect_births_and_reindex(m: np.ndarray, r) -> tuple[np.ndarray, BirthTable]:
    """Relabel a resolved field so labels increase with the birth value of their root."""
    r = as_raster(r)
    flat = np.ascontiguousarray(m, dtype=np.int64).reshape(-1)
    vals = r.flat()
    roots, ties = _sorted_roots(flat, vals, MemoryAccountant())
    if ties:
        warnings.warn(f"{ties} distinct maxima share a value; ties broken by pixel index",
                      RuntimeWarning, stacklevel=2)
    labels = np.empty(flat.size, dtype=np.int64)
    _assign_labels(flat, roots, labels)
    return labels.reshape(r.shape), BirthTable(vals[roots].astype(np.float64), roots.copy(), ties)


def detect_edges(labels: np.ndarray) -> np.ndarray:
    """Pixels whose 3x3 window holds at least two labels (background = -1 ignored)."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    h, w = labels.shape
    flat = labels.reshape(-1)
    n = _edge_scan(flat, h, w, np.empty(0, np.int64), False)
    out = np.empty(n, dtype=np.int64)
    _edge_scan(flat, h, w, out, True)
    return out


def distill(b, r, strict: bool = True, mask: BackgroundMask | None = None) -> np.ndarray:
    """Drop candidates that can never join two components.

    With ``strict`` a pixel survives if it is a local minimum, a saddle along two
    different axes, or its preceding neighbours form two separate groups.
    """
    b = np.asarray(b, dtype=np.int64)
    if not strict:
        return b.copy()
    r = as_raster(r)
    bg, has_mask = _bg_flat(mask, r)
    buf = b.copy()
    k = _distill_kernel(r.flat(), r.height, r.width, bg, has_mask, buf, buf.size,
                        _RING_ADJ, _AXES, _RING_DR, _RING_DC)
    return buf[:k]


def merge_partitions(b, labels: np.ndarray, r):
    """Sweep candidates in descending value order and merge touching components.

    Returns the union-find parent table and ``{label: (death value, death pixel)}``.
    """
    r = as_raster(r)
    vals = r.flat()
    labels_flat = np.ascontiguousarray(labels, dtype=np.int64).reshape(-1)
    k = int(labels_flat.max()) + 1 if labels_flat.size else 0
    keys = np.asarray(b, dtype=np.int64).astype(np.uint64)
    _keys_descending(vals.view(np.uint32), keys, keys.size)
    keys.sort()
    parent = np.arange(k, dtype=np.int64)
    death_val = np.full(k, np.nan, dtype=np.float32)
    death_pix = np.full(k, -1, dtype=np.int64)
    _merge_kernel(keys, keys.size, vals, labels_flat, r.height, r.width, parent, death_val, death_pix)
    deaths = {int(c): (float(death_val[c]), int(death_pix[c])) for c in np.flatnonzero(death_pix >= 0)}
    return parent, deaths


def build_diagram(births: BirthTable, deaths: dict, parent: np.ndarray, labels: np.ndarray, r) -> PersistenceDiagram:
    r = as_raster(r)
    vals = r.flat()
    k = len(births)
    parent = np.array(parent, dtype=np.int64, copy=True)
    death_val = np.full(k, np.nan, dtype=np.float32)
    death_pix = np.full(k, -1, dtype=np.int64)
    for c, (v, p) in deaths.items():
        death_val[c] = v
        death_pix[c] = p
    min_val = np.zeros(k, dtype=np.float32)
    min_pix = np.full(k, -1, dtype=np.int64)
    _region_minima(vals, np.ascontiguousarray(labels, dtype=np.int64).reshape(-1), parent, min_val, min_pix)
    cols = _alloc_output(k, MemoryAccountant())
    bad = _emit(np.asarray(births.pixels, dtype=np.int64), vals, parent, death_val, death_pix,
                min_val, min_pix, *cols)
    if bad >= 0:
        raise ConsistencyError(f"component {bad} has neither a death nor an essential class")
    return _diagram(cols, r.width)


def _alloc_output(k, acct):
    return (
        acct.empty("out_birth", k, np.float64),
        acct.empty("out_death", k, np.float64),
        acct.empty("out_bpix", k, np.int64),
        acct.empty("out_dpix", k, np.int64),
        acct.empty("out_ess", k, np.bool_),
    )


def _diagram(cols, width):
    for a in cols:
        a.flags.writeable = False
    return PersistenceDiagram(*cols, width=width)


# --------------------------------------------------------------------------- driver


@dataclass
class PHRun:
    diagram: PersistenceDiagram
    sweeps: int = 0
    candidates: int = 0
    distilled: int = 0
    merges: int = 0
    tied_births: int = 0
    accountant: MemoryAccountant = field(default_factory=MemoryAccountant)


def run_pixhomology(r, mask: BackgroundMask | None = None, strict_distill: bool = False,
                    accountant: MemoryAccountant | None = None) -> PHRun:
    r = as_raster(r)
    n = r.size
    h, w = r.shape
    acct = accountant if accountant is not None else MemoryAccountant(n)
    if not acct.image_pixels:
        acct.image_pixels = n
    vals = r.flat()
    vbits = vals.view(np.uint32)
    bg, has_mask = _bg_flat(mask, r)
    if has_mask and mask.foreground_count == 0:
        warnings.warn("background mask removes every pixel; diagram is empty", RuntimeWarning, stacklevel=3)
        return PHRun(PersistenceDiagram.empty(w), accountant=acct)

    # steps 1-2
    fld = acct.empty("field", n, np.int64)
    if has_mask:
        masked = acct.empty("masked_values", n, np.float32)
        _fill_background(vals, bg, masked)
        _argmax_kernel(masked, h, w, fld)
        acct.release("masked_values")
        del masked
    else:
        _argmax_kernel(vals, h, w, fld)
    sweeps = _resolve_in_place(fld)
    roots, ties = _sorted_roots(fld, vals, acct)
    if ties:
        warnings.warn(f"{ties} distinct maxima share a value; ties broken by pixel index",
                      RuntimeWarning, stacklevel=3)
    k = roots.size
    labels = acct.empty("labels", n, np.int64)
    _assign_labels(fld, roots, labels)
    acct.release("field")
    del fld

    # steps 3-4
    nb = _edge_scan(labels, h, w, np.empty(0, np.uint64), False)
    edges = acct.empty("edges", nb, np.uint64)
    _edge_scan(labels, h, w, edges, True)
    nd = nb
    if strict_distill:
        nd = _distill_kernel(vals, h, w, bg, has_mask, edges, nb, _RING_ADJ, _AXES, _RING_DR, _RING_DC)

    # step 5
    _keys_descending(vbits, edges, nd)
    edges[:nd].sort()
    parent = acct.empty("parent", k, np.int64)
    _iota(parent)
    death_val = acct.empty("death_val", k, np.float32)
    death_pix = acct.full("death_pix", k, -1, np.int64)
    merges = _merge_kernel(edges, nd, vals, labels, h, w, parent, death_val, death_pix)
    acct.release("edges")
    del edges

    # step 6
    min_val = acct.empty("min_val", k, np.float32)
    min_pix = acct.full("min_pix", k, -1, np.int64)
    _region_minima(vals, labels, parent, min_val, min_pix)
    cols = _alloc_output(k, acct)
    bad = _emit(roots, vals, parent, death_val, death_pix, min_val, min_pix, *cols)
    if bad >= 0:
        raise ConsistencyError(f"component {bad} has neither a death nor an essential class")
    acct.release("labels", "roots", "parent", "death_val", "death_pix", "min_val", "min_pix")
    return PHRun(_diagram(cols, w), sweeps=sweeps, candidates=nb, distilled=nd, merges=merges,
                 tied_births=ties, accountant=acct)


def compute_ph(r, mask: BackgroundMask | None = None, strict_distill: bool = False,
               accountant: MemoryAccountant | None = None) -> PersistenceDiagram:
    """0-dimensional persistence diagram of ``r`` (superlevel filtration).

    Parameters
    ----------
    r : Raster or 2D array
    mask : BackgroundMask, optional
        Background pixels are removed from the domain; each 8-connected foreground
        region is an independent filtration with its own essential class.
    strict_distill : bool
        Prune death candidates before the merge sweep.  The result is identical
        either way; pruning only saves work.
    accountant : MemoryAccountant, optional
        Receives every working allocation; inspect ``accountant.peak`` afterwards.
    """
    return run_pixhomology(r, mask, strict_distill, accountant).diagram


# --------------------------------------------------------------------------- input checks


@dataclass(frozen=True)
class ValidationReport:
    violations: np.ndarray
    width: int

    @property
    def ok(self) -> bool:
        return self.violations.size == 0

    def __bool__(self):
        return self.ok

    def describe(self, limit: int = 10) -> str:
        if self.ok:
            return "ok: no plateau maxima"
        rows, cols = np.divmod(self.violations[:limit], self.width)
        shown = ", ".join(f"({r},{c})" for r, c in zip(rows, cols))
        more = "" if self.violations.size <= limit else f" and {self.violations.size - limit} more"
        return f"{self.violations.size} local-maximum pixels with an equal neighbour: {shown}{more}"


def validate_input(r, mask: BackgroundMask | None = None) -> ValidationReport:
    """Report local-maximum pixels that have an equal-valued 8-neighbour."""
    r = as_raster(r)
    h, w = r.shape
    v = r.values.astype(np.float64)
    if mask is not None:
        v = np.where(mask.is_background, np.nan, v)
    padded = np.full((h + 2, w + 2), np.nan)
    padded[1:-1, 1:-1] = v
    is_max = ~np.isnan(v)
    has_equal = np.zeros((h, w), dtype=bool)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            if dr == 1 and dc == 1:
                continue
            nb = padded[dr:dr + h, dc:dc + w]
            is_max &= ~(nb > v)
            has_equal |= nb == v
    return ValidationReport(np.flatnonzero(is_max & has_equal), w)


def jitter(r, epsilon: float, seed: int = 0) -> Raster:
    """Add seeded uniform noise in (-epsilon, epsilon) to break value ties."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    r = as_raster(r)
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-epsilon, epsilon, size=r.shape)
    return Raster((r.values.astype(np.float64) + noise).astype(np.float32))
