"""Command-line entry point: ``rsma-tradeoff <experiment> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from ..channel import InvalidConfigError
from .config import EXPERIMENTS, METHODS, default_config, load_config, tomllib
from .experiments import MANIFEST, convergence_report, ensure_writable, pareto_frontier, run_experiment

log = logging.getLogger("rsma_tradeoff")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SOLVER_FAILURES = 2

_HELP = {
    "tradeoff": "SE-EE Pareto frontiers over the weight grid (both scalarizations)",
    "ee-vs-snr": "SE and EE of every method over an SNR sweep",
    "convergence": "iteration counts and objective traces on the 3-user scenario",
    "sweep": "Monte Carlo grid over random channels",
}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _methods(text: str) -> tuple[str, ...]:
    names = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsma-tradeoff", description="RSMA SE-EE tradeoff experiments")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for kind in EXPERIMENTS:
        p = sub.add_parser(kind, help=_HELP[kind])
        p.add_argument("--config", help="TOML file with [scenario] and [experiment] tables")
        p.add_argument("--out", help="output directory (default: results/<experiment>)")
        p.add_argument("--seed", type=_u64, help="master seed")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per grid point")
        p.add_argument("--methods", type=_methods, help=f"comma-separated subset of {','.join(METHODS)}")
        p.add_argument("--workers", type=int, help="worker processes (default 1)")
        p.add_argument("--timing", action="store_true", default=None,
                       help="record wall-clock times (CSV output is then no longer byte-reproducible)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace):
    cfg = load_config(args.config, args.experiment) if args.config else default_config(args.experiment)
    overrides = {"out_dir": args.out, "seed": args.seed, "trials": args.trials, "methods": args.methods,
                 "workers": args.workers, "timing": args.timing}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.out is None and not (args.config and _config_sets_out(args.config)):
        overrides["out_dir"] = f"results/{args.experiment}"
    return replace(cfg, **overrides)


def _config_sets_out(path) -> bool:
    with open(path, "rb") as fh:
        return "out_dir" in tomllib.load(fh).get("experiment", {})


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        ensure_writable(cfg.out_dir)
    except (InvalidConfigError, OSError) as exc:
        print(f"rsma-tradeoff: error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    try:
        if cfg.kind == "tradeoff":
            fronts = pareto_frontier(cfg, None if len(cfg.approaches) > 1 else cfg.approaches[0])
            for f in fronts:
                log.info("%s/%s SNR %g dB: %d points", f.method, f.approach, f.snr_db, len(f.w))
        elif cfg.kind == "convergence":
            for c in convergence_report(cfg):
                print(f"{c.method:12s} iterations={c.iterations:4d} inner={c.inner_iterations:4d} "
                      f"objective={c.final_objective:.6f} status={c.status}")
        else:
            run_experiment(cfg)
    except OSError as exc:
        print(f"rsma-tradeoff: error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    with open(cfg.out_dir / MANIFEST, encoding="utf-8") as fh:
        manifest = json.load(fh)
    failures = manifest["solver_failures"]
    print(f"wrote {', '.join(manifest['files'] + [MANIFEST])} to {cfg.out_dir} "
          f"({manifest['runs']} runs, {failures} solver failures)")
    return EXIT_SOLVER_FAILURES if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
