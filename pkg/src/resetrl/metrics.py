"""Run accounting and metrics persistence.

``RunMetrics`` keeps the cumulative counters and per-event logs for one
training run and re-checks its accounting identities after every episode:

* reset_attempts = reset_successes + manual_resets
* triggered_resets + requested_resets = reset_attempts
* forward_share = forward_steps / (forward_steps + reset_steps) in [0, 1]

``MetricsWriter`` appends one row per episode (and per evaluation) to a
CSV file with a fixed header and to a JSON-lines mirror with identical
logical content, flushing after every row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

CSV_COLUMNS = (
    "global_step",
    "episode_index",
    "kind",
    "return",
    "termination",
    "manual_resets",
    "triggered",
    "requested",
    "forward_share",
    "success_rate",
    "p_bar_at_trigger",
    "distance_at_trigger",
)


@dataclass
class TriggerEvent:
    step: int
    observation: np.ndarray
    distance_to_initial: float
    p_bar: float


@dataclass
class EpisodeOutcome:
    kind: str  # forward | reset
    steps: int
    episode_return: float
    termination: str  # triggered | requested | reset_success | manual_reset
    p_bar_at_trigger: Optional[float] = None
    distance_at_trigger: Optional[float] = None
    end_step: int = 0  # global env-step count when the episode finished


@dataclass
class RunMetrics:
    manual_resets: int = 0
    triggered_resets: int = 0
    requested_resets: int = 0
    reset_attempts: int = 0
    reset_successes: int = 0
    forward_steps: int = 0
    reset_steps: int = 0
    irrecoverable_entries: int = 0
    episode_count: int = 0
    eval_log: list = field(default_factory=list)  # (step, forward return)
    trigger_events: list = field(default_factory=list)
    episode_log: list = field(default_factory=list)
    fall_events: list = field(default_factory=list)  # (step, episode kind)

    def forward_share(self) -> float:
        total = self.forward_steps + self.reset_steps
        return self.forward_steps / total if total else 0.0

    def success_rate(self) -> float:
        return self.reset_successes / self.reset_attempts if self.reset_attempts else 0.0

    def check_identities(self) -> None:
        if self.reset_attempts != self.reset_successes + self.manual_resets:
            raise AssertionError("reset_attempts != reset_successes + manual_resets")
        if self.triggered_resets + self.requested_resets != self.reset_attempts:
            raise AssertionError("triggered + requested != reset_attempts")
        if not 0.0 <= self.forward_share() <= 1.0:
            raise AssertionError("forward_share outside [0, 1]")

    def record_episode(self, outcome: EpisodeOutcome) -> None:
        self.episode_log.append(outcome)
        self.episode_count += 1
        self.check_identities()

    def curriculum_stat(self) -> list[tuple[int, float]]:
        """Trigger-event series (training step, distance to initial) in order."""
        return [(ev.step, ev.distance_to_initial) for ev in self.trigger_events]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class MetricsWriter:
    """CSV sink plus JSONL mirror; one logical row each, flushed per write."""

    def __init__(self, out_dir: str | Path):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.csv_path = out_dir / "metrics.csv"
        self.jsonl_path = out_dir / "metrics.jsonl"
        try:
            self._csv = open(self.csv_path, "w")
            self._jsonl = open(self.jsonl_path, "w")
            self._csv.write(",".join(CSV_COLUMNS) + "\n")
            self._csv.flush()
        except OSError as exc:
            raise RuntimeError(f"cannot open metrics sink: {exc}") from exc

    def write_row(self, global_step: int, episode_index: int, kind: str,
                  episode_return: float, termination: str, metrics: RunMetrics,
                  p_bar_at_trigger: Optional[float] = None,
                  distance_at_trigger: Optional[float] = None) -> None:
        row = {
            "global_step": global_step,
            "episode_index": episode_index,
            "kind": kind,
            "return": float(episode_return),
            "termination": termination,
            "manual_resets": metrics.manual_resets,
            "triggered": metrics.triggered_resets,
            "requested": metrics.requested_resets,
            "forward_share": metrics.forward_share(),
            "success_rate": metrics.success_rate(),
            "p_bar_at_trigger": None if p_bar_at_trigger is None else float(p_bar_at_trigger),
            "distance_at_trigger": None if distance_at_trigger is None else float(distance_at_trigger),
        }
        try:
            self._csv.write(",".join(_fmt(row[col]) for col in CSV_COLUMNS) + "\n")
            self._csv.flush()
            self._jsonl.write(json.dumps(row) + "\n")
            self._jsonl.flush()
        except OSError as exc:
            raise RuntimeError(f"metrics write failed: {exc}") from exc

    def close(self) -> None:
        self._csv.close()
        self._jsonl.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_csv_rows(path: str | Path) -> list[dict]:
    """Parse a metrics CSV back into typed dicts (for tests and aggregation)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"unexpected metrics header in {path}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row: dict = dict(zip(CSV_COLUMNS, parts))
        for key in ("global_step", "episode_index", "manual_resets", "triggered", "requested"):
            row[key] = int(row[key])
        for key in ("return", "forward_share", "success_rate"):
            row[key] = float(row[key])
        for key in ("p_bar_at_trigger", "distance_at_trigger"):
            row[key] = float(row[key]) if row[key] else None
        rows.append(row)
    return rows
