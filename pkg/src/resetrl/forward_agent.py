"""Task-learning agent: deterministic-policy actor-critic on env reward.

Standard off-policy setup: tanh actor, action-conditioned critic with MSE
TD loss against target networks, Polyak-averaged targets, Gaussian action
noise for exploration. The agent is deliberately unaware of the reset
machinery; triggered or timed-out episodes are interruptions, so their
last transition still bootstraps (terminal is set only on entering an
irrecoverable state).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import nets
from .replay import TransitionBuffer

Array = np.ndarray


class ForwardAgent:
    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        hidden_dims: tuple[int, ...],
        seed: int,
        gamma: float = 0.99,
        tau: float = 1e-3,
        actor_lr: float = 1e-4,
        critic_lr: float = 1e-3,
        noise_sigma: float = 0.1,
        buffer_capacity: int = 500_000,
    ):
        self.gamma = gamma
        self.tau = tau
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.noise_sigma = noise_sigma
        self.action_dim = action_dim

        actor_spec = nets.MlpSpec(state_dim, hidden_dims, action_dim, "tanh")
        critic_spec = nets.MlpSpec(state_dim, hidden_dims, 1, "linear", action_dim=action_dim)
        seq = np.random.SeedSequence(seed)
        actor_seed, critic_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
        self.actor = nets.init_params(actor_spec, actor_seed)
        self.critic = nets.init_params(critic_spec, critic_seed)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_adam = nets.AdamState.for_params(self.actor)
        self.critic_adam = nets.AdamState.for_params(self.critic)
        self.buffer = TransitionBuffer(buffer_capacity, state_dim, action_dim)
        self.skipped_updates = 0

    def select_action(self, obs: Array, explore: bool, rng: Optional[np.random.Generator] = None) -> Array:
        a, _ = nets.forward(self.actor, obs)
        if explore:
            if rng is None:
                raise ValueError("explore=True requires an rng")
            a = a + rng.normal(0.0, self.noise_sigma, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def store(self, s: Array, a: Array, r: float, s2: Array, terminal: bool) -> None:
        self.buffer.add(s, a, r, s2, terminal)

    def update_critic(self, batch) -> Optional[float]:
        """One TD step on the given batch; returns the loss, or None if skipped."""
        s, a, r, s2, terminal = batch
        b = s.shape[0]
        # Target computed entirely from target networks before any mutation.
        a2, _ = nets.forward(self.actor_target, s2)
        q2, _ = nets.forward(self.critic_target, s2, a2)
        y = r + self.gamma * (1.0 - terminal) * q2[:, 0]
        q, cache = nets.forward(self.critic, s, a, need_cache=True)
        err = q[:, 0] - y
        loss = float(np.mean(err * err))
        if not np.isfinite(loss):
            self.skipped_updates += 1
            return None
        gout = (2.0 / b) * err[:, None]
        grads, _, _ = nets.backward(self.critic, cache, gout)
        if not nets.adam_step(self.critic, grads, self.critic_adam, self.critic_lr):
            self.skipped_updates += 1
            return None
        nets.soft_update(self.critic_target, self.critic, self.tau)
        nets.soft_update(self.actor_target, self.actor, self.tau)
        return loss

    def update_actor(self, batch) -> Optional[float]:
        """Ascend mean Q(s, pi(s)) through the critic's action gradients."""
        s = batch[0]
        b = s.shape[0]
        a, actor_cache = nets.forward(self.actor, s, need_cache=True)
        q, critic_cache = nets.forward(self.critic, s, a, need_cache=True)
        objective = float(np.mean(q))
        gout = np.full((b, 1), 1.0 / b)
        _, _, a_grad = nets.backward(self.critic, critic_cache, gout, need_param_grads=False)
        grads, _, _ = nets.backward(self.actor, actor_cache, a_grad)
        grads.negate()  # ascent
        if not np.isfinite(objective) or not nets.adam_step(self.actor, grads, self.actor_adam, self.actor_lr):
            self.skipped_updates += 1
            return None
        return objective
