"""``sarp-sim <kind> --config FILE [--seed N] [--out DIR] [--jobs N]``.

Exit status: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import dynamics as dyn
from . import photons as ph
from .config import KINDS, ConfigError, load_config
from .integrate import IntegrationError
from .pulse import PulseError
from .sweeps import run_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

NUMERICAL_ERRORS = (IntegrationError, dyn.DynamicsError, PulseError, ph.StatisticsError,
                    ph.FitError, ph.UndefinedFidelityError, FloatingPointError, ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sarp-sim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("--config", required=True, help="experiment config (or a CSV it produced)")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("sarp-sim: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.kind)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        written = run_config(cfg, args.out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # parameter validation inside the models
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for role, path in written.items():
        print(f"{role}: {path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
