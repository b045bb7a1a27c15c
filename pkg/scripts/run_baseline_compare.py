#!/usr/bin/env python3
"""Compare the example-based reset agent against the reward-based baselines
(shaped-reward oracle and sparse-reward variant) on planar-peg remove.

Usage: python scripts/run_baseline_compare.py --out runs/compare [--seeds 3]
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
    parser.add_argument("--config", default=str(REPO / "configs" / "peg_remove.txt"))
    parser.add_argument("--modes", default="ours,lnt,lnt-sparse")
    args = parser.parse_args()
    return cli_main(["compare", "--config", args.config, "--modes", args.modes,
                     "--seeds", str(args.seeds), "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
