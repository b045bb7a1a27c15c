"""Self-supervised reset learner.

The reset agent pairs a deterministic policy with an ensemble of future-
success classifiers trained purely from initial-state examples and replayed
reset transitions. Each member is a trainable logit network plus a frozen
randomized-prior network (logit = z_train + beta * z_prior), so ensemble
disagreement persists away from data. A member's value C = sigmoid(logit)
is clipped to [0, 0.5] wherever a probability is derived, because the
classifier ratio C / (1 - C) must land in [0, 1].

Training labels are bootstrapped: the ratio at the next state under the
target policy (ensemble minimum, target networks) gives the per-transition
label, blended with an n-step variant discounted by gamma^n'. Labels are
constants; gradients flow only through each member's own logit. The policy
ascends the pointwise ensemble-minimum classifier value.

``discounted_success_oracle`` provides the ground truth these ratios should
converge to on finite MDPs, via value iteration on
p(s,a) = (1-gamma) g(s) + gamma E[p(s', policy(s'))].
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import nets
from .replay import ExampleBuffer, SegmentBuffer

Array = np.ndarray

VALUE_CLIP = 0.5


def sigmoid(z: Array) -> Array:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def classifier_ratio(c) -> Array:
    """Map a clipped classifier value C in [0, 0.5] to a probability C/(1-C)."""
    c = np.asarray(c, dtype=np.float64)
    if np.any(c < 0.0) or np.any(c > VALUE_CLIP):
        raise ValueError("classifier values must be clipped to [0, 0.5] first")
    return c / (1.0 - c)


def _bce(z: Array, y) -> Array:
    # cross-entropy of sigmoid(z) against label y, stable for any z
    return np.logaddexp(0.0, -z) + (1.0 - y) * z


PRIOR_FINAL_GAIN = 1.0 / 3.0


def init_prior_params(spec: nets.MlpSpec, seed: int, ensemble: int) -> nets.MlpParams:
    """Random prior networks with real output spread.

    Unlike the trainable nets (whose near-zero final layer keeps early
    outputs uninformative), priors carry fan-in-scale weights everywhere so
    members genuinely disagree away from data. The final layer is damped so
    that the ensemble-average probability stays optimistic at init (no
    spurious triggers before any training).
    """
    rng = np.random.default_rng(seed)
    params = nets.zeros_params(spec, ensemble)
    last = params.n_layers - 1
    for layer, w in enumerate(params.weights):
        bound = 1.0 / np.sqrt(w.shape[-2])
        if layer == last:
            bound *= PRIOR_FINAL_GAIN
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


class ClassifierEnsemble:
    """K trainable-plus-prior logit networks with target copies.

    Parameters are stacked along a leading member axis so the whole
    ensemble evaluates in one batched pass. Prior networks are never
    updated; targets track the trainable parts by Polyak averaging.
    """

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        hidden_dims: tuple[int, ...],
        n_members: int,
        prior_scale: float,
        seed: int,
    ):
        self.n_members = n_members
        self.prior_scale = prior_scale
        spec = nets.MlpSpec(state_dim, hidden_dims, 1, "linear", action_dim=action_dim)
        seq = np.random.SeedSequence(seed)
        train_seed, prior_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
        self.train = nets.init_params(spec, train_seed, ensemble=n_members)
        self.prior = init_prior_params(spec, prior_seed, ensemble=n_members)
        self.target = self.train.copy()
        self.adam = nets.AdamState.for_params(self.train)

    def logits(self, s: Array, a: Array, use_target: bool = False) -> Array:
        """Member logits z_train(+target) + beta * z_prior, shape (K, batch)."""
        params = self.target if use_target else self.train
        z, _ = nets.forward(params, s, a)
        zp, _ = nets.forward(self.prior, s, a)
        z = z + self.prior_scale * zp
        return z[..., 0]

    def values(self, s: Array, a: Array, use_target: bool = False) -> Array:
        """Clipped member values C_i in [0, 0.5]."""
        return np.minimum(sigmoid(self.logits(s, a, use_target)), VALUE_CLIP)

    def success_probability(self, s: Array, a: Array) -> tuple[Array, float, float]:
        """Per-member ratios p_i plus their mean and minimum."""
        p = classifier_ratio(self.values(s, a))
        return p, float(p.mean(axis=0).mean()), float(p.min(axis=0).min())

    def should_trigger(self, s: Array, a: Array, p_thresh: float) -> bool:
        """True iff the ensemble-average success probability drops below p_thresh."""
        if not 0.0 <= p_thresh <= 1.0:
            raise ValueError("p_thresh must lie in [0, 1]")
        _, p_bar, _ = self.success_probability(s, a)
        return p_bar < p_thresh


def rce_labels(
    ensemble: ClassifierEnsemble,
    policy: Callable[[Array], Array],
    s_next: Array,
    s_tail: Array,
    n_realized: Array,
    gamma: float,
) -> tuple[Array, Array, Array]:
    """Bootstrapped targets for a segment batch.

    Returns (y, weight, omega): the blended label
    y = 1/2 (g1/(g1+1) + gn/(gn+1)) with g1 = gamma * omega at the next
    state and gn = gamma^n' * omega at the n'-step state, plus the
    second-term weight 1 + gamma * omega. Everything is computed from
    target networks under the target policy and carries no gradient.
    """
    b = s_next.shape[0]
    states = np.concatenate((s_next, s_tail), axis=0)
    actions = policy(states)
    c = np.minimum(sigmoid(ensemble.logits(states, actions, use_target=True)), VALUE_CLIP)
    c_min = c.min(axis=0)
    ratio = c_min / (1.0 - c_min)
    omega, omega_tail = ratio[:b], ratio[b:]
    g1 = gamma * omega
    gn = gamma**n_realized.astype(np.float64) * omega_tail
    y = 0.5 * (g1 / (g1 + 1.0) + gn / (gn + 1.0))
    weight = 1.0 + g1
    return y, weight, omega


class ResetAgent:
    """Reset policy plus classifier ensemble plus its replay state."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        hidden_dims: tuple[int, ...],
        seed: int,
        gamma: float = 0.99,
        n_step: int = 10,
        n_members: int = 5,
        prior_scale: float = 3.0,
        tau: float = 1e-3,
        actor_lr: float = 1e-4,
        classifier_lr: float = 1e-3,
        noise_sigma: float = 0.1,
        buffer_capacity: int = 500_000,
        example_capacity: int = 10_000,
    ):
        self.gamma = gamma
        self.n_step = n_step
        self.tau = tau
        self.actor_lr = actor_lr
        self.classifier_lr = classifier_lr
        self.noise_sigma = noise_sigma
        self.action_dim = action_dim

        seq = np.random.SeedSequence(seed)
        actor_seed, ens_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
        self.actor = nets.init_params(nets.MlpSpec(state_dim, hidden_dims, action_dim, "tanh"), actor_seed)
        self.actor_target = self.actor.copy()
        self.actor_adam = nets.AdamState.for_params(self.actor)
        self.ensemble = ClassifierEnsemble(state_dim, action_dim, hidden_dims,
                                           n_members, prior_scale, ens_seed)
        self.segments = SegmentBuffer(buffer_capacity, state_dim, action_dim)
        self.examples = ExampleBuffer(example_capacity, state_dim)
        self.skipped_updates = 0

    # -- acting ---------------------------------------------------------

    def select_action(self, obs: Array, explore: bool, rng: Optional[np.random.Generator] = None) -> Array:
        a, _ = nets.forward(self.actor, obs)
        if explore:
            if rng is None:
                raise ValueError("explore=True requires an rng")
            a = a + rng.normal(0.0, self.noise_sigma, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def _policy_target(self, states: Array) -> Array:
        a, _ = nets.forward(self.actor_target, states)
        return a

    def should_trigger(self, obs: Array, action: Array, p_thresh: float) -> bool:
        return self.ensemble.should_trigger(obs, action, p_thresh)

    def trigger_value(self, obs: Array, action: Array) -> float:
        return self.ensemble.success_probability(obs, action)[1]

    # -- example collection ---------------------------------------------

    def add_initial_example(self, state, env) -> None:
        """Admit one initial-state observation; non-initial states are a bug."""
        if not env.is_initial(state):
            raise ValueError("add_initial_example called with a non-initial state")
        self.examples.add(state.observation)

    # -- learning -------------------------------------------------------

    def update_classifier(self, example_states: Array, seg_batch, labels=None,
                          rng: Optional[np.random.Generator] = None) -> Optional[float]:
        """One cross-entropy step for every member on shared bootstrapped labels.

        Example actions are drawn uniformly when ``rng`` is given: one step
        of any bounded action from an initial state still leaves the system
        a step away from home, so the label-1 anchor legitimately covers the
        whole action box there, the pending forward actions the trigger
        evaluates included. Without an rng the deterministic policy action
        is used. ``labels`` overrides the (y, weight) pair computed from the
        target networks; label-freezing analyses use it to show that no
        gradient flows through the label side.
        """
        s, a, s_next, s_tail, n_real = seg_batch[0], seg_batch[1], seg_batch[2], seg_batch[3], seg_batch[4]
        be, bs = example_states.shape[0], s.shape[0]
        if labels is None:
            y, weight, _ = rce_labels(self.ensemble, self._policy_target,
                                      s_next, s_tail, n_real, self.gamma)
        else:
            y, weight = labels
        if rng is not None:
            example_actions = rng.uniform(-1.0, 1.0, (be, self.action_dim))
        else:
            example_actions, _ = nets.forward(self.actor, example_states)

        states = np.concatenate((example_states, s), axis=0)
        actions = np.concatenate((example_actions, a), axis=0)
        z_train, cache = nets.forward(self.ensemble.train, states, actions, need_cache=True)
        z_prior, _ = nets.forward(self.ensemble.prior, states, actions)
        z = (z_train + self.ensemble.prior_scale * z_prior)[..., 0]  # (K, be+bs)

        # CE on the raw sigmoid; labels enter as constants.
        sig = sigmoid(z)
        gout = np.empty_like(z)
        gout[:, :be] = (1.0 - self.gamma) * (sig[:, :be] - 1.0) / be
        gout[:, be:] = weight * (sig[:, be:] - y) / bs
        loss_members = ((1.0 - self.gamma) * _bce(z[:, :be], 1.0).mean(axis=1)
                        + (weight * _bce(z[:, be:], y)).mean(axis=1))
        loss = float(loss_members.mean())
        if not np.isfinite(loss):
            self.skipped_updates += 1
            return None
        grads, _, _ = nets.backward(self.ensemble.train, cache, gout[..., None])
        if not nets.adam_step(self.ensemble.train, grads, self.ensemble.adam, self.classifier_lr):
            self.skipped_updates += 1
            return None
        nets.soft_update(self.ensemble.target, self.ensemble.train, self.tau)
        return loss

    def update_actor(self, seg_states: Array) -> Optional[float]:
        """Ascend the per-sample ensemble-minimum classifier value."""
        b = seg_states.shape[0]
        ens = self.ensemble
        a, actor_cache = nets.forward(self.actor, seg_states, need_cache=True)
        z_train, train_cache = nets.forward(ens.train, seg_states, a, need_cache=True)
        z_prior, prior_cache = nets.forward(ens.prior, seg_states, a, need_cache=True)
        z = (z_train + ens.prior_scale * z_prior)[..., 0]  # (K, b)
        k_min = z.argmin(axis=0)
        cols = np.arange(b)
        sig = sigmoid(z)
        objective = float(sig[k_min, cols].mean())

        # Subgradient flows through the argmin member only; the action feeds
        # both its trainable and prior halves.
        gout = np.zeros_like(z)
        gout[k_min, cols] = sig[k_min, cols] * (1.0 - sig[k_min, cols]) / b
        _, _, ag_train = nets.backward(ens.train, train_cache, gout[..., None], need_param_grads=False)
        _, _, ag_prior = nets.backward(ens.prior, prior_cache, gout[..., None], need_param_grads=False)
        action_grad = ag_train.sum(axis=0) + ens.prior_scale * ag_prior.sum(axis=0)
        grads, _, _ = nets.backward(self.actor, actor_cache, action_grad)
        grads.negate()  # ascent
        if not np.isfinite(objective) or not nets.adam_step(self.actor, grads, self.actor_adam, self.actor_lr):
            self.skipped_updates += 1
            return None
        nets.soft_update(self.actor_target, self.actor, self.tau)
        return objective

    def train_step(self, rng: np.random.Generator, example_batch: int, segment_batch: int) -> None:
        """One classifier step plus one policy step, skipping on empty buffers."""
        if len(self.segments) == 0 or len(self.examples) == 0:
            return
        ex = self.examples.sample(rng, example_batch)
        seg = self.segments.sample(rng, segment_batch)
        self.update_classifier(ex, seg, rng=rng)
        self.update_actor(seg[0])


def discounted_success_oracle(
    transitions: Array,
    policy: Array,
    initial_mask: Array,
    gamma: float,
    tol: float = 1e-10,
    max_iters: int = 1_000_000,
) -> Array:
    """Ground-truth discounted success probabilities for a finite MDP.

    ``transitions`` is either an integer array (S, A) of deterministic
    successor states or a float array (S, A, S) of transition
    probabilities. ``policy`` maps each state to its action index. Solves
    the fixed point p(s,a) = (1-gamma) g(s) + gamma E[p(s', policy(s'))]
    by value iteration to within ``tol`` (sup norm).

    A state that reaches the initial set in exactly T steps and stays
    there gets p = gamma**T.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    transitions = np.asarray(transitions)
    deterministic = transitions.ndim == 2
    if deterministic:
        n_states, n_actions = transitions.shape
    else:
        n_states, n_actions, _ = transitions.shape
        row_sums = transitions.sum(axis=2)
        if not np.allclose(row_sums, 1.0):
            raise ValueError("stochastic transitions must sum to 1 per (s, a)")
    g = np.asarray(initial_mask, dtype=np.float64)
    policy = np.asarray(policy, dtype=np.int64)

    p = np.zeros((n_states, n_actions))
    base = (1.0 - gamma) * g[:, None]
    for _ in range(max_iters):
        p_pol = p[np.arange(n_states), policy]  # p(s', policy(s'))
        if deterministic:
            nxt = p_pol[transitions]
        else:
            nxt = transitions @ p_pol
        p_new = base + gamma * nxt
        delta = np.abs(p_new - p).max()
        p = p_new
        if delta < tol:
            return p
    raise RuntimeError("value iteration failed to converge")
