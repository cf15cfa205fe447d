"""Makespan of the three partitioning strategies on a skewed batch.

The batch is one large frame plus several desk-scale frames.  Wall makespans only
mean something when the host has at least as many cores as workers; the per-worker
CPU makespan is printed alongside.

    python scripts/run_partitioning.py --workers 2 --big-side 2048 --small 7
"""
import argparse
import tempfile
from pathlib import Path

from pixhom.datagen import SceneConfig, generate_image
from pixhom.pipeline import available_cores, run_batch
from pixhom.raster import write_raster


def build(directory: Path, big_side: int, n_small: int, seed: int) -> Path:
    density = SceneConfig().n_stars / (512 * 512)
    names = []
    big = SceneConfig(width=big_side, height=big_side, n_stars=round(density * big_side ** 2), seed=seed)
    write_raster(generate_image(big), directory / "big.pxh")
    names.append("big.pxh")
    for i in range(n_small):
        write_raster(generate_image(SceneConfig(seed=seed + 1 + i)), directory / f"small_{i}.pxh")
        names.append(f"small_{i}.pxh")
    manifest = directory / "manifest.txt"
    manifest.write_text("".join(n + "\n" for n in names), encoding="utf-8")
    return manifest


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workers", type=int, default=2)
    p.add_argument("--big-side", type=int, default=2048)
    p.add_argument("--small", type=int, default=7)
    p.add_argument("--filter", default="vanilla")
    p.add_argument("--seed", type=int, default=100)
    args = p.parse_args()

    print(f"# cores available: {available_cores()}")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        manifest = build(tmp, args.big_side, args.small, args.seed)
        print("strategy,workers,makespan_s,cpu_makespan_s,elapsed_s,assignment")
        for strategy in ("executors", "images", "lpt"):
            res = run_batch(manifest, args.workers, strategy, args.filter, tmp / strategy, seed=0)
            sched = res.schedule.assignment if res.schedule.is_static else "dynamic"
            print(f"{res.strategy.value},{args.workers},{res.makespan:.3f},{res.cpu_makespan:.3f},"
                  f"{res.elapsed:.3f},\"{sched}\"")


if __name__ == "__main__":
    main()
