"""Command-line harness: single runs, threshold sweeps, baseline comparisons.

Exit codes: 0 on success, 1 for usage/config problems, 2 for runtime
failures. Sweeps and comparisons fan out one child process per
(setting, seed) so every run stays single-threaded and deterministic,
then aggregate the children's metrics files.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .metrics import read_csv_rows
from .orchestrator import load_train_state, evaluate_snapshot, run_training

SWEEP_THRESH_DEFAULT = "0.05,0.1,0.2,0.4"
COMPARE_MODES_DEFAULT = "ours,lnt,lnt-sparse"
MODE_TO_BASELINE = {"ours": "none", "lnt": "lnt", "lnt-sparse": "lnt-sparse"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="resetrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training run")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--resume", default=None, help="checkpoint directory to resume from")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)

    p_sweep = sub.add_parser("sweep", help="train across reset-trigger thresholds")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--p-thresh", default=SWEEP_THRESH_DEFAULT)
    p_sweep.add_argument("--seeds", type=int, default=3)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int, default=os.cpu_count())

    p_cmp = sub.add_parser("compare", help="compare against the LNT baselines")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--modes", default=COMPARE_MODES_DEFAULT)
    p_cmp.add_argument("--seeds", type=int, default=3)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--jobs", type=int, default=os.cpu_count())
    return parser


def _cmd_train(args) -> int:
    overrides = {} if args.seed is None else {"seed": args.seed}
    cfg = load_config(args.config, overrides)
    run_training(cfg, out_dir=args.out, resume_from=args.resume)
    return 0


def _cmd_eval(args) -> int:
    ts = load_train_state(args.checkpoint)
    returns = []
    for episode in range(args.episodes):
        ep_return, termination = evaluate_snapshot(ts)
        returns.append(ep_return)
        print(f"eval episode {episode}: return {ep_return:.4f} ({termination})")
    mean = sum(returns) / len(returns) if returns else 0.0
    print(f"mean return over {len(returns)} episodes: {mean:.4f}")
    return 0


def _child_env() -> dict:
    env = dict(os.environ)
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = "1"
    return env


def run_children(jobs: list[list[str]], max_parallel: int) -> None:
    """Run child CLI invocations, at most max_parallel at a time."""
    pending = list(jobs)
    running: list[tuple[subprocess.Popen, list[str]]] = []
    failures: list[str] = []
    env = _child_env()
    while pending or running:
        while pending and len(running) < max(1, max_parallel):
            cmd = pending.pop(0)
            running.append((subprocess.Popen(cmd, env=env), cmd))
        proc, cmd = running.pop(0)
        if proc.wait() != 0:
            failures.append(" ".join(cmd))
    if failures:
        raise RuntimeError("child runs failed:\n" + "\n".join(failures))


def _train_cmd(config: str, seed: int, out: Path, extra: dict) -> list[str]:
    cmd = [sys.executable, "-m", "resetrl.cli", "train",
           "--config", str(config), "--seed", str(seed), "--out", str(out)]
    return cmd


def _final_stats(out_dir: Path) -> dict:
    rows = read_csv_rows(out_dir / "metrics.csv")
    if not rows:
        raise RuntimeError(f"no metrics rows in {out_dir}")
    last = rows[-1]
    eval_returns = [r["return"] for r in rows if r["kind"] == "eval"]
    return {
        "average return": sum(eval_returns) / len(eval_returns) if eval_returns else 0.0,
        "manual resets": last["manual_resets"],
        "forward share": last["forward_share"],
        "success rate": last["success_rate"],
    }


def _write_variant_config(base_path: str, out: Path, extra: dict) -> Path:
    text = Path(base_path).read_text()
    lines = [line for line in text.splitlines()
             if line.split("#")[0].split("=")[0].strip() not in extra]
    lines += [f"{key} = {value}" for key, value in extra.items()]
    path = out / "config_variant.txt"
    out.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def _cmd_sweep(args) -> int:
    load_config(args.config)  # validate before spawning anything
    try:
        thresholds = [float(part) for part in args.p_thresh.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --p-thresh list: {exc}")
    if not thresholds:
        raise UsageError("need at least one threshold")
    out = Path(args.out)
    jobs, dirs = [], {}
    for thresh in thresholds:
        for seed in range(args.seeds):
            run_dir = out / f"p{thresh:g}_seed{seed}"
            variant = _write_variant_config(args.config, run_dir, {"p_thresh": thresh})
            jobs.append(_train_cmd(variant, seed, run_dir, {}))
            dirs[(thresh, seed)] = run_dir
    run_children(jobs, args.jobs)

    lines = ["p_thresh,seed,average_return,manual_resets,forward_share,success_rate"]
    for (thresh, seed), run_dir in dirs.items():
        stats = _final_stats(run_dir)
        lines.append(f"{thresh:g},{seed},{stats['average return']},{stats['manual resets']},"
                     f"{stats['forward share']},{stats['success rate']}")
    summary = out / "sweep_summary.csv"
    summary.write_text("\n".join(lines) + "\n")
    print(summary.read_text(), end="")
    return 0


def _cmd_compare(args) -> int:
    load_config(args.config)
    modes = [mode.strip() for mode in args.modes.split(",") if mode.strip()]
    unknown = [m for m in modes if m not in MODE_TO_BASELINE]
    if unknown:
        raise UsageError(f"unknown modes: {unknown}; choose from {sorted(MODE_TO_BASELINE)}")
    out = Path(args.out)
    jobs, dirs = [], {}
    for mode in modes:
        for seed in range(args.seeds):
            run_dir = out / f"{mode}_seed{seed}"
            variant = _write_variant_config(args.config, run_dir,
                                            {"baseline": MODE_TO_BASELINE[mode]})
            jobs.append(_train_cmd(variant, seed, run_dir, {}))
            dirs[(mode, seed)] = run_dir
    run_children(jobs, args.jobs)

    columns = ("average return", "manual resets", "forward share", "success rate")
    lines = ["mode," + ",".join(c.replace(" ", "_") for c in columns)]
    print(f"{'mode':<12}" + "".join(f"{c:>16}" for c in columns))
    for mode in modes:
        per_seed = [_final_stats(dirs[(mode, seed)]) for seed in range(args.seeds)]
        agg = {c: sum(s[c] for s in per_seed) / len(per_seed) for c in columns}
        print(f"{mode:<12}" + "".join(f"{agg[c]:>16.4f}" for c in columns))
        lines.append(f"{mode}," + ",".join(str(agg[c]) for c in columns))
    summary = out / "compare_summary.csv"
    summary.write_text("\n".join(lines) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"train": _cmd_train, "eval": _cmd_eval,
                   "sweep": _cmd_sweep, "compare": _cmd_compare}[args.command]
        return handler(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
