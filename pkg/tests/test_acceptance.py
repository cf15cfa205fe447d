"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line
with the measured numbers, then asserts the same condition at the stated tolerance."""
import heapq
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from pixhom.bench import crop_benchmark, loglog_fit
from pixhom.datagen import SceneConfig, generate_dataset, generate_image
from pixhom.memory import MemoryAccountant
from pixhom.metrics import bottleneck_distance
from pixhom.oracle import count_local_maxima, oracle_ph
from pixhom.phcore import compute_ph, validate_input
from pixhom.pipeline import available_cores, brute_force_makespan, lpt_makespan, run_batch
from pixhom.raster import (FilterLevel, Raster, apply_background_mask, estimate_threshold,
                           scaled_threshold, write_raster)


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {detail}")
    return emit


# ---------------------------------------------------------------- 1

def test_c1_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    compute_ph(Raster(np.zeros((2, 2), np.float32) + np.eye(2, dtype=np.float32)))
    t0 = time.perf_counter()
    worst, mismatched = 0.0, 0
    for _ in range(200):
        vals = rng.permutation(64 * 64).astype(np.float32) + rng.random(64 * 64).astype(np.float32) * 0.5
        r = Raster(vals.reshape(64, 64))
        d, o = compute_ph(r), oracle_ph(r)
        worst = max(worst, bottleneck_distance(d, o))
        mismatched += d.key() != o.key()
    elapsed = time.perf_counter() - t0
    ok = worst == 0 and mismatched == 0 and elapsed < 60
    report(1, "oracle equivalence", ok,
           f"200 rasters 64x64, max bottleneck {worst}, pair-set mismatches {mismatched}, {elapsed:.1f}s (< 60s)")
    assert ok


# ---------------------------------------------------------------- 2

def three_bumps():
    rr, cc = np.mgrid[0:64, 0:64].astype(np.float64)
    bumps = [(16.0, 16.0, 10.0), (16.0, 48.0, 7.0), (48.0, 32.0, 4.0)]
    img = sum(h * np.exp(-((rr - r0) ** 2 + (cc - c0) ** 2) / (2 * 5.0 ** 2)) for r0, c0, h in bumps)
    # shallow bowl around the tallest bump keeps the far field strictly sloped
    img -= 2e-3 * ((rr - 16.27) ** 2 + 1.37 * (cc - 15.61) ** 2)
    return Raster(img.astype(np.float32))


def widest_path_death(r, start, birth):
    """Highest level at which ``start`` connects to a pixel higher than ``birth``."""
    v = r.values
    h, w = v.shape
    best = {start: float(v[start])}
    heap = [(-float(v[start]), start)]
    while heap:
        neg, (y, x) = heapq.heappop(heap)
        level = -neg
        if v[y, x] > birth:
            return level
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if (dy or dx) and 0 <= ny < h and 0 <= nx < w:
                    cand = min(level, float(v[ny, nx]))
                    if cand > best.get((ny, nx), -np.inf):
                        best[(ny, nx)] = cand
                        heapq.heappush(heap, (-cand, (ny, nx)))
    return None


def test_c2_three_bumps(report):
    r = three_bumps()
    assert len(np.unique(r.values)) == r.size and count_local_maxima(r) == 3
    d, o = compute_ph(r), oracle_ph(r)
    low = min(d, key=lambda p: p.birth)
    high = max(d, key=lambda p: p.birth)
    saddle = widest_path_death(r, r.rc(low.birth_pixel), low.birth)
    amin = int(np.argmin(r.flat()))
    ok = (len(d) == 3 and d.key() == o.key() and not low.essential and low.death == saddle
          and high.essential and high.death_pixel == amin and int(d.essential.sum()) == 1)
    report(2, "three Gaussian bumps", ok,
           f"{len(d)} pairs, lowest bump dies at {low.death:.4f} (widest-path saddle {saddle:.4f}), "
           f"essential death pixel {r.rc(high.death_pixel)} vs argmin {r.rc(amin)}, "
           f"oracle match {d.key() == o.key()}")
    assert ok


# ---------------------------------------------------------------- 3

def test_c3_stability(report):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst_excess, n_done, redraws = -np.inf, 0, 0
    while n_done < 100:
        side = int(rng.integers(8, 40))
        f = Raster(rng.random((side, side)).astype(np.float32))
        if not validate_input(f).ok:
            redraws += 1
            continue
        eps = float(rng.uniform(1e-3, 0.2))
        e = rng.uniform(-1, 1, size=f.shape)
        e *= eps / np.max(np.abs(e))
        g = Raster((f.values + e).astype(np.float32))
        if not validate_input(g).ok:
            redraws += 1
            continue
        dist = bottleneck_distance(compute_ph(f), compute_ph(g))
        worst_excess = max(worst_excess, dist - eps)
        n_done += 1
    elapsed = time.perf_counter() - t0
    ok = worst_excess <= 1e-6 and elapsed < 60
    report(3, "stability", ok,
           f"100 rasters, max(bottleneck - eps) = {worst_excess:.3g} (<= 1e-6), "
           f"{redraws} invalid draws redrawn, {elapsed:.1f}s (< 60s)")
    assert ok


# ---------------------------------------------------------------- 4

def test_c4_filtering(report):
    scenes = [generate_image(SceneConfig(seed=s)) for s in range(10)]
    compute_ph(scenes[0])
    fractions, missing = [], 0
    t_vanilla = t_filtered = t_threshold = 0.0
    for r in scenes:
        t0 = time.perf_counter()
        t = scaled_threshold(estimate_threshold(r), FilterLevel.STD)
        t_threshold += time.perf_counter() - t0
        mask = apply_background_mask(r, t)
        fractions.append(mask.dropped_fraction)
        vanilla, filtered = compute_ph(r), compute_ph(r, mask)
        kept = set(filtered.key())
        missing += sum(1 for p in vanilla if p.death >= t and tuple(p) not in kept)
        # interleaved best-of-9 so drift on a shared machine hits both sides alike
        tv, tf = [], []
        for _ in range(9):
            s = time.perf_counter()
            compute_ph(r)
            tv.append(time.perf_counter() - s)
            s = time.perf_counter()
            compute_ph(r, mask)
            tf.append(time.perf_counter() - s)
        t_vanilla += min(tv)
        t_filtered += min(tf)
    lo, hi = min(fractions), max(fractions)
    ratio = t_filtered / t_vanilla
    ok = 0.01 <= lo and hi <= 0.15 and missing == 0 and ratio <= 1.05
    report(4, "filtering", ok,
           f"filter_std dropped {100 * lo:.2f}%..{100 * hi:.2f}% (mean {100 * np.mean(fractions):.2f}%, "
           f"range 1-15%), vanilla pairs with death >= t missing: {missing}, PH time filtered/vanilla "
           f"{ratio:.3f} (<= 1.05); threshold pass adds {1000 * t_threshold / 10:.1f} ms/image")
    assert ok


# ---------------------------------------------------------------- 5

def test_c5_lpt_quality(report):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    violations, worst = 0, Fraction(0)
    for _ in range(500):
        n = int(rng.integers(1, 11))
        m = int(rng.integers(1, 4))
        costs = rng.integers(1, 100, size=n).tolist()
        lpt, opt = lpt_makespan(costs, m), brute_force_makespan(costs, m)
        bound = Fraction(4, 3) - Fraction(1, 3 * m)
        worst = max(worst, Fraction(lpt, opt))
        violations += Fraction(lpt) > bound * opt
    worked = lpt_makespan([7, 5, 4, 3, 2], 2)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and worked == 11 and elapsed < 30
    report(5, "LPT quality", ok,
           f"500 instances, bound violations {violations}, worst lpt/opt {float(worst):.4f}, "
           f"[7,5,4,3,2] m=2 -> {worked} (expect 11), {elapsed:.1f}s (< 30s)")
    assert ok


# ---------------------------------------------------------------- 6

@pytest.fixture(scope="module")
def desk_batch(tmp_path_factory):
    return generate_dataset(SceneConfig(), 64, tmp_path_factory.mktemp("desk"))


def test_c6_scaling(report, desk_batch, tmp_path):
    cores = available_cores()
    walls = {}
    for m in (1, 2, 4):
        res = run_batch(desk_batch, m, "images", "vanilla", tmp_path / f"w{m}")
        assert not res.failed
        walls[m] = res.elapsed
    speedup = walls[1] / walls[4]
    ok = cores >= 4 and walls[2] < walls[1] and walls[4] < walls[2] and speedup >= 2.5
    note = "" if cores >= 4 else f"; host exposes {cores} core(s), criterion needs >= 4"
    report(6, "scaling", ok,
           f"64 desk images, wall(1)={walls[1]:.2f}s wall(2)={walls[2]:.2f}s wall(4)={walls[4]:.2f}s, "
           f"speedup(4) {speedup:.2f}x (>= 2.5){note}")
    assert ok


# ---------------------------------------------------------------- 7

def skewed_batch(directory: Path) -> Path:
    """One 2048x2048 frame followed by seven 512x512 frames, same source density."""
    directory.mkdir(parents=True, exist_ok=True)
    big = SceneConfig(width=2048, height=2048, n_stars=16 * SceneConfig().n_stars, seed=100)
    write_raster(generate_image(big), directory / "big.pxh")
    names = ["big.pxh"]
    for i in range(7):
        write_raster(generate_image(SceneConfig(seed=200 + i)), directory / f"small_{i}.pxh")
        names.append(f"small_{i}.pxh")
    manifest = directory / "manifest.txt"
    manifest.write_text("".join(n + "\n" for n in names), encoding="utf-8")
    return manifest


def test_c7_straggler(report, tmp_path):
    manifest = skewed_batch(tmp_path / "skewed")
    m = 2
    res = {s: run_batch(manifest, m, s, "vanilla", tmp_path / s, seed=0)
           for s in ("executors", "images", "lpt")}
    wall = {s: r.makespan for s, r in res.items()}
    cpu = {s: r.cpu_makespan for s, r in res.items()}
    cores = available_cores()
    ok = cores >= m and wall["images"] <= wall["executors"] and wall["lpt"] <= wall["executors"]
    note = "" if cores >= m else (f"; host exposes {cores} core(s) for {m} workers, so wall makespans "
                                  f"all equal total work; per-worker CPU makespans "
                                  f"executors={cpu['executors']:.2f}s images={cpu['images']:.2f}s "
                                  f"lpt={cpu['lpt']:.2f}s")
    report(7, "straggler mitigation", ok,
           f"1x2048^2 + 7x512^2 on {m} workers, makespan executors={wall['executors']:.2f}s "
           f"images={wall['images']:.2f}s lpt={wall['lpt']:.2f}s{note}")
    assert ok


# ---------------------------------------------------------------- 8

def test_c8_memory(report):
    side = 2048
    density = SceneConfig().n_stars / (512 * 512)
    scene = SceneConfig(width=side, height=side, n_stars=round(density * side * side), seed=3)
    r = generate_image(scene)
    acct = MemoryAccountant(r.size)
    compute_ph(r, accountant=acct)
    per_px = acct.peak / r.size
    rows = crop_benchmark(max_side=2048, min_side=64, factor=2, repeats=1, seed=0)
    slope, r2 = loglog_fit([row.pixels for row in rows], [row.peak_bytes for row in rows])
    ok = per_px <= 100 and abs(slope - 1) <= 0.1 and r2 >= 0.98
    report(8, "memory discipline", ok,
           f"2048^2 peak {per_px:.1f} B/px (<= 100), {acct.peak_full_arrays} full-length arrays live at peak; "
           f"bench sides {[row.side for row in rows]}: log-log slope {slope:.3f} (1 +- 0.1), R^2 {r2:.4f} (>= 0.98)")
    assert ok


# ---------------------------------------------------------------- 9

def test_c9_determinism(report, tmp_path):
    manifest = generate_dataset(SceneConfig(width=192, height=160, n_stars=100, seed=5), 8, tmp_path / "ds")
    runs = [(m, s) for s in ("executors", "images", "lpt") for m in (1, 2, 3)]
    blobs = {}
    for level in ("vanilla", "std"):
        for m, s in runs:
            res = run_batch(manifest, m, s, level, tmp_path / f"{level}_{s}_{m}", seed=m)
            assert not res.failed
            blobs[(level, m, s)] = [res.csv_path(j).read_bytes() for j in range(8)]
    identical = all(blobs[(lvl, m, s)] == blobs[(lvl, 1, "executors")] for lvl, m, s in blobs)
    ok = identical
    report(9, "determinism", ok,
           f"8 images x {len(runs)} (strategy, workers) runs x 2 filter levels, byte-identical CSVs: {identical}")
    assert ok
