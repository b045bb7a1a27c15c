#!/usr/bin/env python3
"""Cliff-runner trigger ablation: falls and learning curves with the reset
trigger enabled versus disabled, aggregated over seeds.

Usage: python scripts/run_cliff_ablation.py --out runs/cliff_ablation [--seeds 3]
"""

import argparse
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--config", default=str(REPO / "configs" / "cliff.txt"))
    args = parser.parse_args()

    out = Path(args.out)
    jobs = []
    for trig in (True, False):
        arm = "trigger" if trig else "no_trigger"
        for seed in range(args.seeds):
            run_dir = out / f"{arm}_seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            cfg = run_dir / "config.txt"
            base = Path(args.config).read_text()
            cfg.write_text(base + f"\ntrigger_enabled = {str(trig).lower()}\n")
            jobs.append([sys.executable, "-m", "resetrl.cli", "train",
                         "--config", str(cfg), "--seed", str(seed), "--out", str(run_dir)])

    from resetrl.cli import run_children
    run_children(jobs, max_parallel=2)

    from resetrl.metrics import read_csv_rows
    for arm in ("trigger", "no_trigger"):
        finals, returns = [], []
        for seed in range(args.seeds):
            rows = read_csv_rows(out / f"{arm}_seed{seed}" / "metrics.csv")
            finals.append(rows[-1])
            evals = [r["return"] for r in rows if r["kind"] == "eval"]
            q = max(1, len(evals) // 4)
            returns.append((sum(evals[:q]) / q, sum(evals[-q:]) / q))
        manual = sum(r["manual_resets"] for r in finals)
        print(f"{arm}: manual resets {manual}, "
              f"eval first/last quartile per seed {[(round(a, 1), round(b, 1)) for a, b in returns]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
