"""Command line entry point: ``apskga {optimize,sweep,curve,evaluate,export-paper-constellations}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__, harness
from .constellation import DocumentError, load, validate
from .genetic import Crossover, Selection

GENE_COUNTS = """\
gene counts (radii + phases):
  16apsk: double 5, single 9, none 17
  32apsk: double 10, single 18, none 34
"""

# flag dest -> ExperimentSpec / GaConfig key
_FLAG_KEYS = {
    "layout": "layout", "symmetry": "symmetry", "selection": "selection",
    "crossover": "crossover", "pop": "pop_size", "generations": "max_generations",
    "snr_db": "snr_db", "symbols": "n_symbols", "seed": "seed", "replicates": "replicate_count",
    "workers": "workers", "out": "out",
}


def _experiment_flags(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--config", help="JSON file with ExperimentSpec/GaConfig keys")
    p.add_argument("--layout", choices=["16apsk", "32apsk"])
    p.add_argument("--symmetry", choices=["double", "single", "none"])
    if not sweep:
        p.add_argument("--selection", type=str.lower,
                       choices=[s.name.lower() for s in Selection])
        p.add_argument("--crossover", type=str.lower,
                       choices=[c.name.lower() for c in Crossover])
    p.add_argument("--pop", type=int, help="population size (default 80)")
    p.add_argument("--generations", type=int, help="maximum generations (default 130)")
    p.add_argument("--snr-db", type=float, help="target Es/N0 in dB (default 10)")
    p.add_argument("--symbols", type=int, help="Monte Carlo symbols per fitness call")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    if sweep:
        p.add_argument("--replicates", type=int, help="seeds per cell (default 5)")
    p.add_argument("--workers", type=int, help="parallel workers (results do not depend on it)")
    p.add_argument("--out", help="output directory")


def _spec(args: argparse.Namespace) -> harness.ExperimentSpec:
    d: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            d[key] = v
    return harness.spec_from_dict(d)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="apskga", description="Genetic optimization of APSK constellations.",
        epilog=GENE_COUNTS, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"apskga {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run one GA optimization", epilog=GENE_COUNTS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _experiment_flags(p)

    p = sub.add_parser("sweep", help="run every selection x crossover pair", epilog=GENE_COUNTS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _experiment_flags(p, sweep=True)

    p = sub.add_parser("curve", help="MSE versus SNR for constellation documents")
    p.add_argument("documents", nargs="+")
    p.add_argument("--snr-min", type=float, default=0.0)
    p.add_argument("--snr-max", type=float, default=20.0)
    p.add_argument("--snr-step", type=float, default=1.0)
    p.add_argument("--symbols", type=int, default=harness.CURVE_SYMBOLS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="curve.csv", help="output CSV path")

    p = sub.add_parser("evaluate", help="MSE of one constellation at one SNR")
    p.add_argument("document")
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--method", choices=["mc", "exact"], default="mc")
    p.add_argument("--symbols", type=int, default=harness.CURVE_SYMBOLS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print one JSON object")

    p = sub.add_parser("export-paper-constellations",
                       help="write the published 16/32-APSK constellations as documents")
    p.add_argument("--out", default="constellations")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (ValueError, DocumentError) as exc:
        print(f"apskga {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"apskga {args.command}: I/O error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "optimize":
        spec = _spec(args)
        res = harness.cmd_optimize(spec)
        s = res.summary
        print(f"best_mse {s['best_mse']:.6f} (validated {s['validated_mse']:.6f}) "
              f"after {s['generations']} generations, {s['termination_reason']}")
        print(f"wrote {spec.out}/constellation.json, trace.csv, summary.json")
        return 0

    if args.command == "sweep":
        spec = _spec(args)
        res = harness.cmd_sweep(spec)
        print(res.table_csv(), end="")
        failed = sum(1 for _, r in res.runs if r["error"])
        if failed:
            print(f"{failed} run(s) failed; see sweep_runs.csv", file=sys.stderr)
            return 1
        return 0

    if args.command == "curve":
        n = int(round((args.snr_max - args.snr_min) / args.snr_step)) + 1
        grid = [args.snr_min + i * args.snr_step for i in range(n)]
        res, errors = harness.cmd_curve(args.documents, args.out, grid, args.symbols, args.seed)
        for e in errors:
            print(f"apskga curve: error: {e}", file=sys.stderr)
        print(f"wrote {args.out} ({sum(len(v) for v in res.curves.values())} rows)")
        return 1 if errors else 0

    if args.command == "evaluate":
        c = load(args.document)
        problems = validate(c)
        if problems:
            raise ValueError(f"{args.document}: " + "; ".join(problems))
        rec = harness.cmd_evaluate(c, args.snr_db, args.method, args.symbols, args.seed)
        if args.json:
            print(json.dumps(rec, sort_keys=True))
        else:
            for k, v in rec.items():
                print(f"{k}: {v}")
        return 0

    paths = harness.export_published(args.out)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
