"""Batch wall time against worker count on a generated desk-scale dataset.

    python scripts/run_scaling.py --images 64 --workers 1 2 4
"""
import argparse
import tempfile
from pathlib import Path

from pixhom.datagen import SceneConfig, generate_dataset
from pixhom.pipeline import available_cores, run_batch


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--images", type=int, default=64)
    p.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4])
    p.add_argument("--strategy", default="images")
    p.add_argument("--filter", default="vanilla")
    args = p.parse_args()

    print(f"# cores available: {available_cores()}")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        manifest = generate_dataset(SceneConfig(), args.images, tmp / "ds")
        base = None
        print("workers,elapsed_s,makespan_s,cpu_makespan_s,speedup")
        for m in args.workers:
            res = run_batch(manifest, m, args.strategy, args.filter, tmp / f"out{m}")
            base = base or res.elapsed
            print(f"{m},{res.elapsed:.3f},{res.makespan:.3f},{res.cpu_makespan:.3f},{base / res.elapsed:.2f}")


if __name__ == "__main__":
    main()
