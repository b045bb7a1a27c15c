"""Reward-based reset agents for comparison runs.

LNT-style learners replace the example classifier with an ensemble of
reset Q-functions trained on an environment-provided reset reward: either
shaped (one minus normalized distance to the initial state) or sparse
(1 exactly at initial states). Resets trigger when the ensemble-minimum
Q-value falls below a fixed threshold. Everything else about the training
loop is shared with the main method; only the learner and trigger rule
differ.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import nets
from .replay import ExampleBuffer, SegmentBuffer

Array = np.ndarray

DEFAULT_Q_THRESH = {"shaped": 20.0, "sparse": 0.1}


class LntResetAgent:
    """Reset policy plus a K-member reset Q ensemble with per-member targets."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        hidden_dims: tuple[int, ...],
        seed: int,
        reward_mode: str,
        initial_distance_scale: float,
        q_thresh: Optional[float] = None,
        gamma: float = 0.99,
        n_members: int = 20,
        tau: float = 1e-3,
        actor_lr: float = 1e-4,
        critic_lr: float = 1e-3,
        noise_sigma: float = 0.1,
        buffer_capacity: int = 500_000,
        example_capacity: int = 10_000,
    ):
        if reward_mode not in ("shaped", "sparse"):
            raise ValueError(f"unknown reset reward mode {reward_mode!r}")
        self.reward_mode = reward_mode
        self.initial_distance_scale = initial_distance_scale
        self.q_thresh = DEFAULT_Q_THRESH[reward_mode] if q_thresh is None else q_thresh
        self.gamma = gamma
        self.n_step = 1  # 1-step targets; the n-step tail in segments is ignored
        self.tau = tau
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.noise_sigma = noise_sigma
        self.action_dim = action_dim

        seq = np.random.SeedSequence(seed)
        actor_seed, critic_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
        self.actor = nets.init_params(nets.MlpSpec(state_dim, hidden_dims, action_dim, "tanh"), actor_seed)
        self.actor_target = self.actor.copy()
        self.actor_adam = nets.AdamState.for_params(self.actor)
        critic_spec = nets.MlpSpec(state_dim, hidden_dims, 1, "linear", action_dim=action_dim)
        self.critics = nets.init_params(critic_spec, critic_seed, ensemble=n_members)
        self.critics_target = self.critics.copy()
        self.critics_adam = nets.AdamState.for_params(self.critics)
        self.segments = SegmentBuffer(buffer_capacity, state_dim, action_dim)
        self.examples = ExampleBuffer(example_capacity, state_dim)
        self.skipped_updates = 0

    # -- acting (same surface as the main reset agent) -------------------

    def select_action(self, obs: Array, explore: bool, rng: Optional[np.random.Generator] = None) -> Array:
        a, _ = nets.forward(self.actor, obs)
        if explore:
            if rng is None:
                raise ValueError("explore=True requires an rng")
            a = a + rng.normal(0.0, self.noise_sigma, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def min_q(self, obs: Array, action: Array) -> float:
        q, _ = nets.forward(self.critics, obs, action)
        return float(q.min())

    def should_trigger(self, obs: Array, action: Array, p_thresh: float) -> bool:
        # p_thresh is part of the shared call signature; LNT thresholds on Q.
        return self.min_q(obs, action) < self.q_thresh

    def trigger_value(self, obs: Array, action: Array) -> float:
        return self.min_q(obs, action)

    def add_initial_example(self, state, env) -> None:
        if not env.is_initial(state):
            raise ValueError("add_initial_example called with a non-initial state")
        self.examples.add(state.observation)

    # -- learning -------------------------------------------------------

    def reset_rewards(self, next_dist_initial: Array, next_is_initial: Array) -> Array:
        if self.reward_mode == "sparse":
            return next_is_initial.astype(np.float64)
        return 1.0 - np.minimum(next_dist_initial / self.initial_distance_scale, 1.0)

    def update_critic(self, seg_batch) -> Optional[float]:
        """Independent TD step per member against its own target network."""
        s, a, s_next = seg_batch[0], seg_batch[1], seg_batch[2]
        next_dist, next_init, next_term = seg_batch[5], seg_batch[6], seg_batch[7]
        b = s.shape[0]
        r = self.reset_rewards(next_dist, next_init)
        a2, _ = nets.forward(self.actor_target, s_next)
        q2, _ = nets.forward(self.critics_target, s_next, a2)  # (K, b, 1)
        y = r + self.gamma * (1.0 - next_term) * q2[..., 0]
        q, cache = nets.forward(self.critics, s, a, need_cache=True)
        err = q[..., 0] - y
        loss = float(np.mean(err * err))
        if not np.isfinite(loss):
            self.skipped_updates += 1
            return None
        gout = (2.0 / b) * err[..., None]
        grads, _, _ = nets.backward(self.critics, cache, gout)
        if not nets.adam_step(self.critics, grads, self.critics_adam, self.critic_lr):
            self.skipped_updates += 1
            return None
        nets.soft_update(self.critics_target, self.critics, self.tau)
        return loss

    def update_actor(self, seg_states: Array) -> Optional[float]:
        """Ascend the per-sample ensemble-minimum Q, as the main agent does with C."""
        b = seg_states.shape[0]
        a, actor_cache = nets.forward(self.actor, seg_states, need_cache=True)
        q, cache = nets.forward(self.critics, seg_states, a, need_cache=True)
        qk = q[..., 0]  # (K, b)
        k_min = qk.argmin(axis=0)
        cols = np.arange(b)
        objective = float(qk[k_min, cols].mean())
        gout = np.zeros_like(qk)
        gout[k_min, cols] = 1.0 / b
        _, _, ag = nets.backward(self.critics, cache, gout[..., None], need_param_grads=False)
        grads, _, _ = nets.backward(self.actor, actor_cache, ag.sum(axis=0))
        grads.negate()
        if not np.isfinite(objective) or not nets.adam_step(self.actor, grads, self.actor_adam, self.actor_lr):
            self.skipped_updates += 1
            return None
        nets.soft_update(self.actor_target, self.actor, self.tau)
        return objective

    def train_step(self, rng: np.random.Generator, example_batch: int, segment_batch: int) -> None:
        if len(self.segments) == 0:
            return
        seg = self.segments.sample(rng, segment_batch)
        self.update_critic(seg)
        self.update_actor(seg[0])
