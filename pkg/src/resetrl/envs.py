"""Analytic desk-scale continuous-control environments.

Three closed-form tasks cover the taxonomy the training engine targets:

* ``cliff-runner``: run rightward for velocity reward; crossing x >= 10
  falls off a cliff into an absorbing (irrecoverable) state.
* ``planar-peg``: two-link arm under joint-velocity control moving its tip
  between an "out" pose and an "inserted" pose; fully reversible. Task
  variants ``insert`` and ``remove`` swap initial pose and goal.
* ``spill-reacher``: point mass carrying an unstably tilting load toward a
  goal; letting the tilt exceed 0.5 rad spills the load irreversibly. The
  task reward ignores the tilt entirely.

Environments are value-like: ``step`` is a pure function of (state, action)
and any number of instances may run side by side. Rewards are normalized to
[0, 1] and actions are interpreted on [-1, 1] per component (clipped
internally). Once a state is irrecoverable the dynamics freeze and reward
is 0 forever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    dt: float
    max_forward_steps: int
    default_p_thresh: float

    @property
    def max_reset_steps(self) -> int:
        return 2 * self.max_forward_steps


@dataclass(frozen=True)
class EnvState:
    observation: Array
    irrecoverable: bool = False


@dataclass(frozen=True)
class StepResult:
    next_state: EnvState
    reward: float
    distance_to_goal: float
    distance_to_initial: float


def _check_action(action: Array, dim: int) -> Array:
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (dim,):
        raise ValueError(f"action shape {a.shape}, expected ({dim},)")
    if not np.isfinite(a).all():
        raise ValueError("non-finite action")
    return np.clip(a, -1.0, 1.0)


class Env:
    """Shared contract; subclasses provide the dynamics."""

    spec: EnvSpec
    initial_distance_scale: float  # normalizer for the shaped reset reward

    def reset(self, rng: np.random.Generator) -> EnvState:
        raise NotImplementedError

    def step(self, state: EnvState, action: Array) -> StepResult:
        raise NotImplementedError

    def is_initial(self, state: EnvState) -> bool:
        raise NotImplementedError

    def distance_to_initial(self, state: EnvState) -> float:
        raise NotImplementedError

    def reset_reward(self, state: EnvState, mode: str) -> float:
        """Reset reward for the LNT-style baselines; unused by the main agent."""
        if mode == "sparse":
            return 1.0 if self.is_initial(state) else 0.0
        if mode == "shaped":
            d = self.distance_to_initial(state) / self.initial_distance_scale
            return 1.0 - min(d, 1.0)
        raise ValueError(f"unknown reset reward mode {mode!r}")


class CliffRunner(Env):
    """1-D runner rewarded for positive velocity, absorbing cliff at x = 10.

    Observation (x, v, fallen). v' = clip(v + 2 a dt, [-2, 2]),
    x' = x + v' dt, reward max(v', 0) / 2.
    """

    CLIFF_X = 10.0
    V_MAX = 2.0
    DT = 0.05

    def __init__(self, task: str = "default"):
        if task not in ("default", "run"):
            raise ValueError(f"cliff-runner has no task {task!r}")
        self.spec = EnvSpec("cliff-runner", 3, 1, self.DT, 500, 0.05)
        self.initial_distance_scale = self.CLIFF_X

    def reset(self, rng: np.random.Generator) -> EnvState:
        x = rng.uniform(-0.05, 0.05)
        return EnvState(np.array([x, 0.0, 0.0]))

    def step(self, state: EnvState, action: Array) -> StepResult:
        a = _check_action(action, 1)
        x, v, fallen = state.observation
        if state.irrecoverable:
            return StepResult(state, 0.0, 0.0, self.distance_to_initial(state))
        v2 = float(np.clip(v + 2.0 * a[0] * self.DT, -self.V_MAX, self.V_MAX))
        x2 = x + v2 * self.DT
        falls = x2 >= self.CLIFF_X
        nxt = EnvState(np.array([x2, v2, 1.0 if falls else 0.0]), irrecoverable=falls)
        return StepResult(nxt, max(v2, 0.0) / 2.0, 0.0, self.distance_to_initial(nxt))

    def is_initial(self, state: EnvState) -> bool:
        if state.irrecoverable:
            return False
        x, v, _ = state.observation
        return abs(x) <= 0.1 and abs(v) <= 0.1

    def distance_to_initial(self, state: EnvState) -> float:
        return abs(float(state.observation[0]))


def _tip(theta1: float, theta2: float) -> tuple[float, float]:
    return (
        math.cos(theta1) + 0.8 * math.cos(theta1 + theta2),
        math.sin(theta1) + 0.8 * math.sin(theta1 + theta2),
    )


class PlanarPeg(Env):
    """Two-link arm (lengths 1.0, 0.8) under joint-velocity control.

    Observation (cos t1, sin t1, cos t2, sin t2); angles advance by
    action * dt with |action| <= 1 rad/s. Reward is one minus the tip's
    normalized distance to the goal tip position. No irrecoverable states;
    the ``insert`` and ``remove`` variants swap initial pose and goal.
    """

    DT = 0.05
    OUT_POSE = (math.pi / 2, math.pi / 2)
    IN_POSE = (0.0, math.pi / 2)

    def __init__(self, task: str = "insert"):
        if task not in ("insert", "remove"):
            raise ValueError(f"planar-peg has no task {task!r}")
        self.task = task
        init_pose, goal_pose = (self.OUT_POSE, self.IN_POSE) if task == "insert" else (self.IN_POSE, self.OUT_POSE)
        self.init_pose = init_pose
        self.tip_init = np.array(_tip(*init_pose))
        self.tip_goal = np.array(_tip(*goal_pose))
        self.goal_distance_scale = float(np.linalg.norm(self.tip_init - self.tip_goal))
        self.initial_distance_scale = self.goal_distance_scale
        self.spec = EnvSpec("planar-peg", 4, 2, self.DT, 100, 0.1)

    @staticmethod
    def _obs(theta1: float, theta2: float) -> Array:
        return np.array([math.cos(theta1), math.sin(theta1), math.cos(theta2), math.sin(theta2)])

    @staticmethod
    def angles(state: EnvState) -> tuple[float, float]:
        c1, s1, c2, s2 = state.observation
        return math.atan2(s1, c1), math.atan2(s2, c2)

    def tip_of(self, state: EnvState) -> Array:
        return np.array(_tip(*self.angles(state)))

    def reset(self, rng: np.random.Generator) -> EnvState:
        t1 = self.init_pose[0] + rng.uniform(-0.02, 0.02)
        t2 = self.init_pose[1] + rng.uniform(-0.02, 0.02)
        return EnvState(self._obs(t1, t2))

    def step(self, state: EnvState, action: Array) -> StepResult:
        a = _check_action(action, 2)
        t1, t2 = self.angles(state)
        t1 += a[0] * self.DT
        t2 += a[1] * self.DT
        nxt = EnvState(self._obs(t1, t2))
        d_goal = float(np.linalg.norm(np.array(_tip(t1, t2)) - self.tip_goal))
        reward = 1.0 - min(d_goal / self.goal_distance_scale, 1.0)
        return StepResult(nxt, reward, d_goal, self.distance_to_initial(nxt))

    def is_initial(self, state: EnvState) -> bool:
        return self.distance_to_initial(state) <= 0.05

    def distance_to_initial(self, state: EnvState) -> float:
        return float(np.linalg.norm(self.tip_of(state) - self.tip_init))


class SpillReacher(Env):
    """Point mass carrying a tippy load toward the goal at (1, 0).

    Observation (px, py, vx, vy, phi, spilled). The tilt phi drifts away
    from upright (phi' = phi + dt(0.8 sin phi + 0.6 ax)) and spills
    irreversibly beyond |phi| > 0.5. The task reward only watches position,
    so avoiding spills is entirely the reset machinery's problem.
    """

    DT = 0.05
    SPILL_ANGLE = 0.5
    GOAL = np.array([1.0, 0.0])

    def __init__(self, task: str = "default"):
        if task not in ("default", "reach"):
            raise ValueError(f"spill-reacher has no task {task!r}")
        self.spec = EnvSpec("spill-reacher", 6, 2, self.DT, 100, 0.1)
        self.initial_distance_scale = float(np.linalg.norm(self.GOAL))

    def reset(self, rng: np.random.Generator) -> EnvState:
        p = rng.uniform(-0.02, 0.02, size=2)
        phi = rng.uniform(-0.02, 0.02)
        return EnvState(np.array([p[0], p[1], 0.0, 0.0, phi, 0.0]))

    def step(self, state: EnvState, action: Array) -> StepResult:
        a = _check_action(action, 2)
        if state.irrecoverable:
            return StepResult(state, 0.0,
                              float(np.linalg.norm(state.observation[:2] - self.GOAL)),
                              self.distance_to_initial(state))
        px, py, vx, vy, phi, _ = state.observation
        vx2 = float(np.clip(vx + a[0] * self.DT, -1.0, 1.0))
        vy2 = float(np.clip(vy + a[1] * self.DT, -1.0, 1.0))
        px2, py2 = px + vx2 * self.DT, py + vy2 * self.DT
        phi2 = phi + self.DT * (0.8 * math.sin(phi) + 0.6 * a[0])
        spills = abs(phi2) > self.SPILL_ANGLE
        nxt = EnvState(np.array([px2, py2, vx2, vy2, phi2, 1.0 if spills else 0.0]),
                       irrecoverable=spills)
        d_goal = float(np.linalg.norm(np.array([px2, py2]) - self.GOAL))
        reward = 1.0 - min(d_goal / self.initial_distance_scale, 1.0)
        return StepResult(nxt, reward, d_goal, self.distance_to_initial(nxt))

    def is_initial(self, state: EnvState) -> bool:
        if state.irrecoverable:
            return False
        px, py, vx, vy, phi, _ = state.observation
        return (math.hypot(px, py) <= 0.05 and math.hypot(vx, vy) <= 0.1
                and abs(phi) <= 0.1)

    def distance_to_initial(self, state: EnvState) -> float:
        return float(math.hypot(*state.observation[:2]))


ENV_NAMES = ("cliff-runner", "planar-peg", "spill-reacher")

DEFAULT_TASKS = {"cliff-runner": "default", "planar-peg": "insert", "spill-reacher": "default"}


def make_env(name: str, task: str | None = None) -> Env:
    if name not in ENV_NAMES:
        raise ValueError(f"unknown environment {name!r}; choose from {ENV_NAMES}")
    task = task or DEFAULT_TASKS[name]
    if name == "cliff-runner":
        return CliffRunner(task)
    if name == "planar-peg":
        return PlanarPeg(task)
    return SpillReacher(task)
