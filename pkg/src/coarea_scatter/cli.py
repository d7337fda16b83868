"""Command line: ``coarea-scatter {grid,reconstruct,gpc,validate}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import ConfigError, load
from .errors import FiberSolveError, PlacementError, SingularityError

log = logging.getLogger("coarea_scatter")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

COMMANDS = {
    "grid": "emit coarea and naive grids as CSV",
    "reconstruct": "sweep kernels over kappa and L and tabulate reconstruction errors",
    "gpc": "estimate the gPC table of scattering coefficients",
    "validate": "compare the expectation against per-realization Monte Carlo solves",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coarea-scatter",
        description="Coarea cubature and null-field reconstruction for random star-shaped scatterers.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", help="INI experiment file (defaults apply when omitted)")
        s.add_argument("--out", help="output directory (overrides output.directory)")
        s.add_argument("--seed", type=int, help="oracle seed (overrides oracle.seed)")
        s.add_argument("--threads", type=int, help="worker threads (overrides output.threads)")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration key; repeatable")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args):
    cfg = load(args.config)
    overrides = {}
    for item in args.set:
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"--set {item!r}: expected SECTION.KEY=VALUE")
        overrides[key.strip()] = value
    if args.out is not None:
        overrides["output.directory"] = args.out
    if args.seed is not None:
        overrides["oracle.seed"] = str(args.seed)
    if args.threads is not None:
        overrides["output.threads"] = str(args.threads)
    return cfg.with_overrides(overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = cfg.output.directory
    try:
        if args.command == "grid":
            files = pipeline.run_grid(cfg, outdir)
        elif args.command == "reconstruct":
            files, _ = pipeline.run_reconstruct(cfg, outdir)
        elif args.command == "gpc":
            files, _ = pipeline.run_gpc(cfg, outdir)
        else:
            files, report, _, _ = pipeline.run_validate(cfg, outdir)
            log.info("max |b_exact - b_approx| = %.3e", report.max_error)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pipeline.NumericalFailure, FiberSolveError, PlacementError, SingularityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # parameter errors raised while building shapes and grids from the config
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        log.info("wrote %s", f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
