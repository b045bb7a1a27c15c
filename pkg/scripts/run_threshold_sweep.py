#!/usr/bin/env python3
"""Reset-trigger threshold sweep on planar-peg insert (forward-share trend).

Thin wrapper over the CLI sweep subcommand with the packaged config.

Usage: python scripts/run_threshold_sweep.py --out runs/sweep [--seeds 3]
"""

import argparse
import sys
from pathlib import Path

from resetrl.cli import main as cli_main

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--config", default=str(REPO / "configs" / "peg_insert.txt"))
    parser.add_argument("--p-thresh", default="0.05,0.1,0.2,0.4")
    args = parser.parse_args()
    return cli_main(["sweep", "--config", args.config, "--p-thresh", args.p_thresh,
                     "--seeds", str(args.seeds), "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
