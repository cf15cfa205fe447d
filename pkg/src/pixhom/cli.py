"""Command-line front end.

Exit codes: 0 ok, 1 some batch jobs failed, 2 input error, 3 verification mismatch.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import __version__
from .bench import crop_benchmark
from .datagen import SceneConfig, generate_dataset
from .diagram import diagram_to_csv, read_diagram_csv
from .errors import PixHomError, PreconditionError
from .metrics import bottleneck_distance
from .oracle import oracle_ph
from .phcore import compute_ph, jitter, validate_input
from .pipeline import BatchFailed, run_batch
from .raster import DEFAULT_K, FilterLevel, apply_background_mask, estimate_threshold, read_raster, scaled_threshold

EXIT_OK, EXIT_PARTIAL, EXIT_INPUT, EXIT_MISMATCH = 0, 1, 2, 3

FILTERS = [lvl.value for lvl in FilterLevel]
STRATEGIES = ["executors", "images", "lpt"]


def _err(msg):
    print(f"pixhom: {msg}", file=sys.stderr)


def cmd_compute(args) -> int:
    try:
        r = read_raster(args.image)
    except (OSError, PixHomError) as exc:
        _err(exc)
        return EXIT_INPUT
    if args.jitter is not None:
        r = jitter(r, args.jitter, args.seed)
    level = FilterLevel.parse(args.filter)
    mask = None
    if level is not FilterLevel.VANILLA:
        mask = apply_background_mask(r, scaled_threshold(estimate_threshold(r, args.k), level))
    if args.validate:
        report = validate_input(r, mask)
        if not report.ok:
            _err(f"input violates the strict-maximum condition: {report.describe()}")
            _err("rerun with --jitter EPS to break ties, or --no-validate to proceed anyway")
            return EXIT_INPUT
    with warnings.catch_warnings():
        warnings.simplefilter("ignore" if args.quiet else "default", RuntimeWarning)
        diagram = compute_ph(r, mask, strict_distill=args.strict_distill)
    if args.oracle:
        try:
            reference = oracle_ph(r, mask, allow_ties=True)
        except PreconditionError as exc:
            _err(f"oracle: {exc}")
            return EXIT_INPUT
        dist = bottleneck_distance(diagram, reference)
        if dist != 0 or diagram.key() != reference.key():
            _err(f"oracle mismatch: bottleneck distance {dist!r}, "
                 f"{len(diagram)} vs {len(reference)} pairs")
            return EXIT_MISMATCH
    text = diagram_to_csv(diagram, sublevel=args.sublevel)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_batch(args) -> int:
    if not Path(args.manifest).is_file():
        _err(f"manifest not found: {args.manifest}")
        return EXIT_INPUT
    try:
        result = run_batch(args.manifest, args.workers, args.strategy, args.filter, args.out,
                           k=args.k, seed=args.seed, strict_distill=args.strict_distill)
    except BatchFailed as exc:
        _err(exc)
        return EXIT_PARTIAL
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"cannot read manifest: {exc}")
        return EXIT_INPUT
    print(f"jobs={len(result.records)} failed={len(result.failed)} workers={args.workers} "
          f"strategy={result.strategy.value} makespan_s={result.makespan:.3f} "
          f"summary={result.summary_path}")
    return EXIT_PARTIAL if result.failed else EXIT_OK


def cmd_gen(args) -> int:
    try:
        cfg = SceneConfig(width=args.width, height=args.height, n_stars=args.n_stars,
                          sky_level=args.sky, read_noise_sigma=args.noise, psf_sigma=args.psf,
                          flux_min=args.flux_min, flux_max=args.flux_max, seed=args.seed)
        manifest = generate_dataset(cfg, args.count, args.out)
    except ValueError as exc:
        _err(exc)
        return EXIT_INPUT
    except OSError as exc:
        _err(exc)
        return EXIT_INPUT
    print(manifest)
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        d1 = read_diagram_csv(args.d1)
        d2 = read_diagram_csv(args.d2)
        dist = bottleneck_distance(d1, d2)
    except (OSError, PixHomError) as exc:
        _err(exc)
        return EXIT_INPUT
    print(repr(dist))
    return EXIT_OK if dist <= args.tol else EXIT_MISMATCH


def cmd_bench(args) -> int:
    try:
        rows = crop_benchmark(args.max_side, args.min_side, args.factor, args.repeats, args.seed)
    except ValueError as exc:
        _err(exc)
        return EXIT_INPUT
    lines = ["side,pixels,seconds,peak_bytes,bytes_per_pixel"]
    lines += [f"{r.side},{r.pixels},{r.seconds:.6f},{r.peak_bytes},{r.bytes_per_pixel:.3f}" for r in rows]
    text = "\n".join(lines) + "\n"
    try:
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        _err(exc)
        return EXIT_INPUT
    return EXIT_OK


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pixhom", description="0-dimensional persistent homology of images.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def filter_flags(sp):
        sp.add_argument("--filter", choices=FILTERS, default="vanilla",
                        help="background filtering level (default: vanilla, no masking)")
        sp.add_argument("--k", type=float, default=DEFAULT_K,
                        help=f"threshold = median + k*1.4826*MAD (default: {DEFAULT_K})")
        sp.add_argument("--strict-distill", action="store_true",
                        help="prune death candidates before merging (same result, different speed)")

    c = sub.add_parser("compute", help="persistence diagram of one PXH image")
    c.add_argument("image")
    c.add_argument("--out", help="write CSV here instead of stdout")
    g = c.add_mutually_exclusive_group()
    g.add_argument("--validate", dest="validate", action="store_true", default=True,
                   help="check the strict-maximum condition first (default)")
    g.add_argument("--no-validate", dest="validate", action="store_false",
                   help="skip the strict-maximum check")
    c.add_argument("--oracle", action="store_true", help="cross-check against the union-find oracle")
    c.add_argument("--sublevel", action="store_true", help="emit negated values (points above the diagonal)")
    c.add_argument("--jitter", type=_positive_float, metavar="EPS", help="add seeded noise in (-EPS, EPS) first")
    c.add_argument("--seed", type=int, default=0, help="seed for --jitter")
    c.add_argument("--quiet", action="store_true", help="suppress tie warnings")
    filter_flags(c)
    c.set_defaults(func=cmd_compute)

    b = sub.add_parser("batch", help="process every image in a manifest")
    b.add_argument("manifest")
    b.add_argument("--workers", type=_positive_int, default=1)
    b.add_argument("--strategy", choices=STRATEGIES, default="lpt")
    b.add_argument("--out", default="batch_out", help="directory for <id>.dgm.csv and summary.jsonl")
    b.add_argument("--seed", type=int, default=0, help="shuffle seed for --strategy executors")
    filter_flags(b)
    b.set_defaults(func=cmd_batch)

    d = SceneConfig()
    gn = sub.add_parser("gen", help="generate a synthetic star-field dataset")
    gn.add_argument("--out", default="dataset")
    gn.add_argument("--count", type=int, default=90)
    gn.add_argument("--width", type=_positive_int, default=d.width)
    gn.add_argument("--height", type=_positive_int, default=d.height)
    gn.add_argument("--n-stars", type=int, default=d.n_stars)
    gn.add_argument("--sky", type=float, default=d.sky_level)
    gn.add_argument("--noise", type=float, default=d.read_noise_sigma)
    gn.add_argument("--psf", type=float, default=d.psf_sigma)
    gn.add_argument("--flux-min", type=float, default=d.flux_min)
    gn.add_argument("--flux-max", type=float, default=d.flux_max)
    gn.add_argument("--seed", type=int, default=d.seed)
    gn.set_defaults(func=cmd_gen)

    cp = sub.add_parser("compare", help="bottleneck distance between two diagram CSVs")
    cp.add_argument("d1")
    cp.add_argument("d2")
    cp.add_argument("--tol", type=float, default=0.0, help="exit 0 iff distance <= tol (default 0)")
    cp.set_defaults(func=cmd_compare)

    bn = sub.add_parser("bench", help="time and memory over a geometric sweep of crop sizes")
    bn.add_argument("--max-side", type=_positive_int, default=2048)
    bn.add_argument("--min-side", type=_positive_int, default=20)
    bn.add_argument("--factor", type=float, default=2.0)
    bn.add_argument("--repeats", type=_positive_int, default=3)
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--out", help="write CSV here instead of stdout")
    bn.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
