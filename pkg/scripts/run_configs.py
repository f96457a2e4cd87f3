"""Run every example config through the CLI.

    python3 scripts/run_configs.py [--out results] [--jobs N] [name ...]
"""

import argparse
import sys
from pathlib import Path

from sarpsim.cli import main as cli_main
from sarpsim.config import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    paths = sorted(CONFIGS.glob("*.toml"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    worst = 0
    for p in paths:
        kind = load_config(p).kind
        print(f"== {p.name} ({kind})", flush=True)
        worst = max(worst, cli_main([kind, "--config", str(p), "--out", args.out, "--jobs", str(args.jobs)]))
    return worst


if __name__ == "__main__":
    sys.exit(main())
