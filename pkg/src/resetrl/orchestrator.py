"""Training loop: alternating forward and reset episodes with reset triggers.

One cycle = a forward episode (ends triggered or requested) followed by a
reset episode (ends in success or a manual reset). The first 1000 env
steps act uniformly at random with no updates or triggers to seed both
replay buffers. Cycles repeat until the step budget (forward plus reset
steps) is spent; evaluation snapshots and metrics rows are emitted at
cycle boundaries, where the accounting identities are re-checked.

Everything is driven by named RNG streams spawned from the run seed, so a
run is a pure function of its config and checkpoints can resume it
bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .baselines import LntResetAgent
from .checkpoint import CheckpointError, load_payload, save_payload
from .config import RunConfig, config_to_text, parse_config_text
from .envs import Env, EnvState, make_env
from .forward_agent import ForwardAgent
from .metrics import EpisodeOutcome, MetricsWriter, RunMetrics, TriggerEvent
from . import nets

Array = np.ndarray

RNG_STREAMS = ("env", "noise", "sample", "eval")


@dataclass
class TrainState:
    cfg: RunConfig
    env: Env
    state: EnvState
    fwd: ForwardAgent
    rst: Union["ResetAgent", LntResetAgent]
    metrics: RunMetrics
    rngs: dict
    global_step: int = 0
    next_eval: int = 0
    next_checkpoint: int = 0


def _build_reset_agent(cfg: RunConfig, env: Env, seed: int):
    from .reset_agent import ResetAgent

    common = dict(
        state_dim=env.spec.state_dim,
        action_dim=env.spec.action_dim,
        hidden_dims=cfg.hidden_dims,
        seed=seed,
        gamma=cfg.gamma,
        tau=cfg.tau,
        actor_lr=cfg.actor_lr,
        noise_sigma=cfg.noise_sigma,
        buffer_capacity=cfg.buffer_capacity,
        example_capacity=cfg.example_capacity,
    )
    if cfg.baseline == "none":
        return ResetAgent(n_step=cfg.n_step, n_members=cfg.ensemble_size,
                          prior_scale=cfg.prior_scale, classifier_lr=cfg.critic_lr, **common)
    return LntResetAgent(reward_mode=cfg.reward_mode,
                         initial_distance_scale=env.initial_distance_scale,
                         q_thresh=cfg.lnt_q_thresh, n_members=cfg.lnt_ensemble_size,
                         critic_lr=cfg.critic_lr, **common)


def init_train_state(cfg: RunConfig) -> TrainState:
    env = make_env(cfg.env, cfg.task)
    seq = np.random.SeedSequence(cfg.seed)
    children = seq.spawn(len(RNG_STREAMS) + 2)
    rngs = {name: np.random.default_rng(child) for name, child in zip(RNG_STREAMS, children)}
    fwd_seed, rst_seed = (int(c.generate_state(1)[0]) for c in children[len(RNG_STREAMS):])
    fwd = ForwardAgent(env.spec.state_dim, env.spec.action_dim, cfg.hidden_dims, fwd_seed,
                       gamma=cfg.gamma, tau=cfg.tau, actor_lr=cfg.actor_lr,
                       critic_lr=cfg.critic_lr, noise_sigma=cfg.noise_sigma,
                       buffer_capacity=cfg.buffer_capacity)
    rst = _build_reset_agent(cfg, env, rst_seed)
    state = env.reset(rngs["env"])
    return TrainState(cfg=cfg, env=env, state=state, fwd=fwd, rst=rst,
                      metrics=RunMetrics(), rngs=rngs,
                      next_eval=cfg.eval_interval,
                      next_checkpoint=cfg.checkpoint_interval or 0)


def _action(ts: TrainState, agent, explore: bool) -> tuple[Array, bool]:
    """Agent action with exploration noise, or uniform random during warmup."""
    warmup = ts.global_step < ts.cfg.warmup_steps
    if warmup and explore:
        return ts.rngs["noise"].uniform(-1.0, 1.0, ts.env.spec.action_dim), True
    return agent.select_action(ts.state.observation, explore, ts.rngs["noise"]), warmup


def run_forward_episode(ts: TrainState) -> EpisodeOutcome:
    """Algorithm: collect an initial-state example, then roll the forward
    policy until the reset agent vetoes a pending action (triggered) or the
    step limit is hit (requested). A vetoed action is never executed and its
    transition is never stored."""
    cfg, env, metrics = ts.cfg, ts.env, ts.metrics
    if not env.is_initial(ts.state):
        raise AssertionError("forward episode must start at an initial state")
    ts.rst.add_initial_example(ts.state, env)
    ep_return, steps = 0.0, 0
    p_bar = dist = None
    while True:
        action, warmup = _action(ts, ts.fwd, explore=True)
        if not warmup and cfg.trigger_enabled and \
                ts.rst.should_trigger(ts.state.observation, action, cfg.p_thresh):
            termination = "triggered"
            p_bar = ts.rst.trigger_value(ts.state.observation, action)
            dist = env.distance_to_initial(ts.state)
            metrics.triggered_resets += 1
            metrics.trigger_events.append(
                TriggerEvent(ts.global_step, ts.state.observation.copy(), dist, p_bar))
            break
        if steps >= env.spec.max_forward_steps:
            termination = "requested"
            metrics.requested_resets += 1
            break
        res = env.step(ts.state, action)
        entered_irrec = res.next_state.irrecoverable and not ts.state.irrecoverable
        if entered_irrec:
            metrics.irrecoverable_entries += 1
            metrics.fall_events.append((ts.global_step, "forward"))
        ts.fwd.store(ts.state.observation, action, res.reward,
                     res.next_state.observation, entered_irrec)
        ep_return += res.reward
        steps += 1
        ts.global_step += 1
        metrics.forward_steps += 1
        ts.state = res.next_state
        if not warmup:
            batch = ts.fwd.buffer.sample(ts.rngs["sample"], cfg.batch_size)
            ts.fwd.update_critic(batch)
            ts.fwd.update_actor(batch)
    return EpisodeOutcome("forward", steps, ep_return, termination, p_bar, dist,
                          end_step=ts.global_step)


def _flush_segments(ts: TrainState, episode: list, start: int, final: bool) -> int:
    """Move finished n-step segments from the episode-local list into the buffer.

    ``episode`` holds (obs, action, obs_next, next_dist, next_initial,
    next_terminal) tuples. A segment for index t is ready once the n-step
    successor exists; at episode end the remaining tail uses the realized
    (shorter) horizon.
    """
    n = ts.rst.n_step
    total = len(episode)
    while start < total:
        n_real = min(n, total - start)
        if n_real < n and not final:
            break
        obs, action, obs_next, next_dist, next_init, next_term = episode[start]
        tail_obs = episode[start + n_real - 1][2]
        ts.rst.segments.add(obs, action, obs_next, tail_obs, n_real,
                            next_dist, next_init, next_term)
        start += 1
    return start


def run_reset_episode(ts: TrainState) -> EpisodeOutcome:
    """Roll the reset policy until the initial set is reached; exhausting the
    step budget costs one manual reset (environment teleport)."""
    cfg, env, metrics = ts.cfg, ts.env, ts.metrics
    metrics.reset_attempts += 1
    ep_return, steps = 0.0, 0
    termination = None
    episode: list = []
    flushed = 0
    if env.is_initial(ts.state):
        termination = "reset_success"
        metrics.reset_successes += 1
    else:
        while steps < env.spec.max_reset_steps:
            action, warmup = _action(ts, ts.rst, explore=True)
            res = env.step(ts.state, action)
            entered_irrec = res.next_state.irrecoverable and not ts.state.irrecoverable
            if entered_irrec:
                metrics.irrecoverable_entries += 1
                metrics.fall_events.append((ts.global_step, "reset"))
            episode.append((ts.state.observation, action, res.next_state.observation,
                            res.distance_to_initial, env.is_initial(res.next_state),
                            entered_irrec))
            flushed = _flush_segments(ts, episode, flushed, final=False)
            ep_return += res.reward
            steps += 1
            ts.global_step += 1
            metrics.reset_steps += 1
            ts.state = res.next_state
            if not warmup:
                ts.rst.train_step(ts.rngs["sample"], cfg.reset_batch_size, cfg.reset_batch_size)
            if env.is_initial(ts.state):
                termination = "reset_success"
                metrics.reset_successes += 1
                break
        if termination is None:
            termination = "manual_reset"
            metrics.manual_resets += 1
            ts.state = env.reset(ts.rngs["env"])
    _flush_segments(ts, episode, flushed, final=True)
    return EpisodeOutcome("reset", steps, ep_return, termination, end_step=ts.global_step)


def evaluate_snapshot(ts: TrainState) -> tuple[float, str]:
    """Noise-free forward+reset rollout pair on a fresh initial state.

    Touches no buffers or parameters; returns the undiscounted forward
    return and how the forward episode ended.
    """
    cfg, env = ts.cfg, ts.env
    rng = ts.rngs["eval"]
    state = env.reset(rng)
    ep_return, steps = 0.0, 0
    termination = None
    while True:
        action = ts.fwd.select_action(state.observation, explore=False)
        if cfg.trigger_enabled and cfg.eval_trigger and \
                ts.rst.should_trigger(state.observation, action, cfg.p_thresh):
            termination = "triggered"
            break
        if steps >= env.spec.max_forward_steps:
            termination = "requested"
            break
        res = env.step(state, action)
        ep_return += res.reward
        steps += 1
        state = res.next_state
    for _ in range(env.spec.max_reset_steps):
        if env.is_initial(state):
            break
        action = ts.rst.select_action(state.observation, explore=False)
        state = env.step(state, action).next_state
    return ep_return, termination


def run_training(
    cfg: Optional[RunConfig] = None,
    out_dir: Optional[str | Path] = None,
    resume_from: Optional[str | Path] = None,
) -> TrainState:
    """Run (or resume) one training run to its step budget.

    Deterministic given the config, seed included: two runs with the same
    config produce byte-identical metrics files.
    """
    if resume_from is not None:
        ts = load_train_state(resume_from)
        if cfg is not None and config_to_text(cfg) != config_to_text(ts.cfg):
            raise CheckpointError("config does not match checkpoint; resume refused")
    elif cfg is not None:
        ts = init_train_state(cfg)
    else:
        raise ValueError("need a config or a checkpoint to run")
    cfg = ts.cfg

    writer = None
    out_path = None
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "config_resolved.txt").write_text(config_to_text(cfg))
        writer = MetricsWriter(out_path)

    metrics = ts.metrics
    try:
        while ts.global_step < cfg.total_steps:
            fwd_outcome = run_forward_episode(ts)
            rst_outcome = run_reset_episode(ts)
            metrics.record_episode(fwd_outcome)
            fwd_index = metrics.episode_count
            metrics.record_episode(rst_outcome)
            rst_index = metrics.episode_count
            if writer:
                writer.write_row(fwd_outcome.end_step, fwd_index, "forward",
                                 fwd_outcome.episode_return, fwd_outcome.termination, metrics,
                                 fwd_outcome.p_bar_at_trigger, fwd_outcome.distance_at_trigger)
                writer.write_row(rst_outcome.end_step, rst_index, "reset",
                                 rst_outcome.episode_return, rst_outcome.termination, metrics)
            while ts.next_eval <= ts.global_step:
                eval_return, eval_term = evaluate_snapshot(ts)
                metrics.eval_log.append((ts.global_step, eval_return))
                if writer:
                    writer.write_row(ts.global_step, metrics.episode_count, "eval",
                                     eval_return, eval_term, metrics)
                ts.next_eval += cfg.eval_interval
            if out_path and cfg.checkpoint_interval and ts.global_step >= ts.next_checkpoint > 0:
                save_train_state(ts, out_path / f"checkpoint_{ts.global_step:09d}")
                ts.next_checkpoint += cfg.checkpoint_interval
        if out_path:
            save_train_state(ts, out_path / "checkpoint_final")
    finally:
        if writer:
            writer.close()
    return ts


# -- checkpoint payload assembly ---------------------------------------


def _rng_state(rng: np.random.Generator) -> str:
    return json.dumps(rng.bit_generator.state, sort_keys=True)


def _set_rng_state(rng: np.random.Generator, text: str) -> None:
    rng.bit_generator.state = json.loads(text)


def _buffer_arrays(prefix: str, buf) -> dict[str, Array]:
    out = {f"{prefix}.meta": np.array([buf.capacity, buf.size, buf.head], dtype=np.int64)}
    for name in ("s", "a", "r", "s2", "terminal", "s_next", "s_tail", "n_realized",
                 "next_dist_initial", "next_is_initial", "next_terminal"):
        if hasattr(buf, name):
            out[f"{prefix}.{name}"] = getattr(buf, name)[: buf.size]
    return out


def _restore_buffer(prefix: str, buf, arrays: dict[str, Array]) -> None:
    capacity, size, head = (int(v) for v in arrays[f"{prefix}.meta"])
    if capacity != buf.capacity:
        raise CheckpointError(f"{prefix}: capacity mismatch")
    buf.size, buf.head = size, head
    for name in ("s", "a", "r", "s2", "terminal", "s_next", "s_tail", "n_realized",
                 "next_dist_initial", "next_is_initial", "next_terminal"):
        if hasattr(buf, name):
            getattr(buf, name)[:size] = arrays[f"{prefix}.{name}"]


def _net_arrays(prefix: str, params: nets.MlpParams, adam: Optional[nets.AdamState] = None):
    out = {f"{prefix}.flat": params.flat}
    if adam is not None:
        out[f"{prefix}.adam_m"] = adam.m
        out[f"{prefix}.adam_v"] = adam.v
    return out


def _net_spec_line(params: nets.MlpParams) -> str:
    s = params.spec
    ens = "" if params.ensemble is None else f" ensemble={params.ensemble}"
    return (f"in={s.input_dim} hidden={','.join(map(str, s.hidden_dims))} "
            f"out={s.output_dim} act={s.output_activation} action_dim={s.action_dim}{ens}")


def _restore_net(prefix: str, params: nets.MlpParams, arrays, adam: Optional[nets.AdamState] = None,
                 adam_steps: int = 0) -> None:
    flat = arrays[f"{prefix}.flat"]
    if flat.shape != params.flat.shape:
        raise CheckpointError(f"{prefix}: parameter shape mismatch")
    params.flat[...] = flat
    if adam is not None:
        adam.m[...] = arrays[f"{prefix}.adam_m"]
        adam.v[...] = arrays[f"{prefix}.adam_v"]
        adam.step_count = adam_steps


def save_train_state(ts: TrainState, path: str | Path) -> None:
    scalars = {
        "global_step": str(ts.global_step),
        "next_eval": str(ts.next_eval),
        "next_checkpoint": str(ts.next_checkpoint),
        "env_irrecoverable": str(int(ts.state.irrecoverable)),
        "fwd_skipped": str(ts.fwd.skipped_updates),
        "rst_skipped": str(ts.rst.skipped_updates),
        "fwd_adam_steps.actor": str(ts.fwd.actor_adam.step_count),
        "fwd_adam_steps.critic": str(ts.fwd.critic_adam.step_count),
        "config": config_to_text(ts.cfg).replace("\n", ";"),
    }
    m = ts.metrics
    for key in ("manual_resets", "triggered_resets", "requested_resets", "reset_attempts",
                "reset_successes", "forward_steps", "reset_steps", "irrecoverable_entries",
                "episode_count"):
        scalars[f"metrics.{key}"] = str(getattr(m, key))
    for name in RNG_STREAMS:
        scalars[f"rng.{name}"] = _rng_state(ts.rngs[name])

    scalars["spec.fwd.actor"] = _net_spec_line(ts.fwd.actor)
    scalars["spec.fwd.critic"] = _net_spec_line(ts.fwd.critic)
    scalars["spec.rst.actor"] = _net_spec_line(ts.rst.actor)
    if isinstance(ts.rst, LntResetAgent):
        scalars["spec.rst.critics"] = _net_spec_line(ts.rst.critics)
    else:
        scalars["spec.rst.classifier"] = _net_spec_line(ts.rst.ensemble.train)

    arrays: dict[str, Array] = {"env_observation": ts.state.observation}
    arrays.update(_net_arrays("fwd.actor", ts.fwd.actor, ts.fwd.actor_adam))
    arrays.update(_net_arrays("fwd.actor_target", ts.fwd.actor_target))
    arrays.update(_net_arrays("fwd.critic", ts.fwd.critic, ts.fwd.critic_adam))
    arrays.update(_net_arrays("fwd.critic_target", ts.fwd.critic_target))
    arrays.update(_buffer_arrays("fwd.buffer", ts.fwd.buffer))

    rst = ts.rst
    arrays.update(_net_arrays("rst.actor", rst.actor, rst.actor_adam))
    arrays.update(_net_arrays("rst.actor_target", rst.actor_target))
    scalars["rst_adam_steps.actor"] = str(rst.actor_adam.step_count)
    if isinstance(rst, LntResetAgent):
        arrays.update(_net_arrays("rst.critics", rst.critics, rst.critics_adam))
        arrays.update(_net_arrays("rst.critics_target", rst.critics_target))
        scalars["rst_adam_steps.critic"] = str(rst.critics_adam.step_count)
    else:
        ens = rst.ensemble
        arrays.update(_net_arrays("rst.ens_train", ens.train, ens.adam))
        arrays.update(_net_arrays("rst.ens_prior", ens.prior))
        arrays.update(_net_arrays("rst.ens_target", ens.target))
        scalars["rst_adam_steps.critic"] = str(ens.adam.step_count)
    arrays.update(_buffer_arrays("rst.segments", rst.segments))
    arrays.update(_buffer_arrays("rst.examples", rst.examples))
    save_payload(path, scalars, arrays)


def load_train_state(path: str | Path) -> TrainState:
    scalars, arrays = load_payload(path)
    cfg = parse_config_text(scalars["config"].replace(";", "\n"))
    ts = init_train_state(cfg)
    ts.global_step = int(scalars["global_step"])
    ts.next_eval = int(scalars["next_eval"])
    ts.next_checkpoint = int(scalars["next_checkpoint"])
    ts.state = EnvState(arrays["env_observation"],
                        bool(int(scalars["env_irrecoverable"])))
    ts.fwd.skipped_updates = int(scalars["fwd_skipped"])
    ts.rst.skipped_updates = int(scalars["rst_skipped"])
    m = ts.metrics
    for key in ("manual_resets", "triggered_resets", "requested_resets", "reset_attempts",
                "reset_successes", "forward_steps", "reset_steps", "irrecoverable_entries",
                "episode_count"):
        setattr(m, key, int(scalars[f"metrics.{key}"]))
    for name in RNG_STREAMS:
        _set_rng_state(ts.rngs[name], scalars[f"rng.{name}"])

    _restore_net("fwd.actor", ts.fwd.actor, arrays, ts.fwd.actor_adam,
                 int(scalars["fwd_adam_steps.actor"]))
    _restore_net("fwd.actor_target", ts.fwd.actor_target, arrays)
    _restore_net("fwd.critic", ts.fwd.critic, arrays, ts.fwd.critic_adam,
                 int(scalars["fwd_adam_steps.critic"]))
    _restore_net("fwd.critic_target", ts.fwd.critic_target, arrays)
    _restore_buffer("fwd.buffer", ts.fwd.buffer, arrays)

    rst = ts.rst
    _restore_net("rst.actor", rst.actor, arrays, rst.actor_adam,
                 int(scalars["rst_adam_steps.actor"]))
    _restore_net("rst.actor_target", rst.actor_target, arrays)
    if isinstance(rst, LntResetAgent):
        _restore_net("rst.critics", rst.critics, arrays, rst.critics_adam,
                     int(scalars["rst_adam_steps.critic"]))
        _restore_net("rst.critics_target", rst.critics_target, arrays)
    else:
        ens = rst.ensemble
        _restore_net("rst.ens_train", ens.train, arrays, ens.adam,
                     int(scalars["rst_adam_steps.critic"]))
        _restore_net("rst.ens_prior", ens.prior, arrays)
        _restore_net("rst.ens_target", ens.target, arrays)
    _restore_buffer("rst.segments", rst.segments, arrays)
    _restore_buffer("rst.examples", rst.examples, arrays)
    return ts
