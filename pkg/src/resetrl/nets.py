"""Dense feed-forward networks with exact reverse-mode gradients.

Plain float64 numpy substrate shared by every agent. Parameters live in a
single flat buffer per network (so an optimizer step is a handful of
vectorized calls) with reshaped views per layer. An optional leading
ensemble axis lets K member networks evaluate in one batched matmul pass,
which is what keeps classifier/Q ensembles affordable on a single core.

Networks are fixed-shape MLPs: ReLU hidden layers, linear or tanh output,
and an optional action input concatenated into the first hidden layer's
activations (the input layer sees states only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

Array = np.ndarray

FINAL_LAYER_BOUND = 3e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one dense network.

    ``action_dim > 0`` declares a second input that is concatenated into the
    first hidden layer (so the weight matrix feeding the second layer sees
    ``hidden_dims[0] + action_dim`` inputs). Policy networks use a tanh
    output; critics and classifier logits are linear.
    """

    input_dim: int
    hidden_dims: tuple[int, ...] = (400, 300)
    output_dim: int = 1
    output_activation: str = "linear"
    action_dim: int = 0

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden dims must be >= 1")
        if self.output_activation not in ("linear", "tanh"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        if self.action_dim < 0:
            raise ValueError("action_dim must be >= 0")
        if self.action_dim > 0 and not self.hidden_dims:
            raise ValueError("action input requires at least one hidden layer")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per affine layer, including action widening."""
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        shapes = []
        for layer in range(len(dims) - 1):
            fan_in = dims[layer]
            if layer == 1 and self.action_dim > 0:
                fan_in += self.action_dim
            shapes.append((fan_in, dims[layer + 1]))
        return shapes

    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes())


class MlpParams:
    """Weights and biases of one network (or a K-stacked ensemble of them).

    All values live in ``flat`` (shape ``(P,)`` or ``(K, P)``); ``weights``
    and ``biases`` are reshaped views into it, so mutating ``flat`` updates
    the layers and vice versa.
    """

    __slots__ = ("spec", "ensemble", "flat", "weights", "biases")

    def __init__(self, spec: MlpSpec, flat: Array, ensemble: Optional[int]):
        if ensemble is None:
            expected = (spec.param_count(),)
        else:
            expected = (ensemble, spec.param_count())
        if flat.shape != expected:
            raise ValueError(f"flat buffer shape {flat.shape}, expected {expected}")
        self.spec = spec
        self.ensemble = ensemble
        self.flat = flat
        self.weights: list[Array] = []
        self.biases: list[Array] = []
        offset = 0
        for fan_in, fan_out in spec.layer_shapes():
            w, offset = self._view(offset, fan_in * fan_out, (fan_in, fan_out))
            # Ensemble biases keep a middle batch axis so they broadcast in x @ w + b.
            b, offset = self._view(offset, fan_out, (fan_out,) if ensemble is None else (1, fan_out))
            self.weights.append(w)
            self.biases.append(b)

    def _view(self, offset: int, count: int, shape: tuple[int, ...]):
        if self.ensemble is None:
            view = self.flat[offset : offset + count].reshape(shape)
        else:
            view = self.flat[:, offset : offset + count].reshape((self.ensemble, *shape))
        return view, offset + count

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, self.flat.copy(), self.ensemble)

    def copy_from(self, other: "MlpParams") -> None:
        if other.spec != self.spec or other.ensemble != self.ensemble:
            raise ValueError("parameter layout mismatch")
        np.copyto(self.flat, other.flat)

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.flat).all())


def zeros_params(spec: MlpSpec, ensemble: Optional[int] = None) -> MlpParams:
    shape = (spec.param_count(),) if ensemble is None else (ensemble, spec.param_count())
    return MlpParams(spec, np.zeros(shape), ensemble)


def init_params(spec: MlpSpec, seed: int, ensemble: Optional[int] = None) -> MlpParams:
    """Deterministic fan-in uniform init; final layer uniform in +-3e-3, biases 0."""
    rng = np.random.default_rng(seed)
    params = zeros_params(spec, ensemble)
    last = params.n_layers - 1
    for layer, w in enumerate(params.weights):
        fan_in = w.shape[-2]
        bound = FINAL_LAYER_BOUND if layer == last else 1.0 / np.sqrt(fan_in)
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


class ForwardCache:
    """Activation record from one forward pass, consumed by backward."""

    __slots__ = ("params", "layer_inputs", "relu_masks", "output", "squeezed", "action_given")

    def __init__(self, params, layer_inputs, relu_masks, output, squeezed, action_given):
        self.params = params
        self.layer_inputs = layer_inputs
        self.relu_masks = relu_masks
        self.output = output
        self.squeezed = squeezed
        self.action_given = action_given


def _as_batch(x: Array) -> tuple[Array, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def forward(
    params: MlpParams,
    state: Array,
    action: Optional[Array] = None,
    need_cache: bool = False,
) -> tuple[Array, Optional[ForwardCache]]:
    """Evaluate the network.

    ``state``/``action`` are ``(dim,)`` or ``(batch, dim)``; ensembled
    parameters broadcast them across members and return ``(K, batch, out)``.
    Pure: identical inputs give identical outputs.
    """
    spec = params.spec
    state2d, squeezed = _as_batch(state)
    if state2d.shape[-1] != spec.input_dim:
        raise ValueError(f"state dim {state2d.shape[-1]}, spec wants {spec.input_dim}")
    if (action is None) != (spec.action_dim == 0):
        raise ValueError("action must be given exactly when the spec has an action input")
    action2d = None
    if action is not None:
        action2d, _ = _as_batch(action)
        if action2d.shape[-1] != spec.action_dim:
            raise ValueError(f"action dim {action2d.shape[-1]}, spec wants {spec.action_dim}")
        if action2d.shape[0] != state2d.shape[0]:
            raise ValueError("state/action batch sizes differ")

    x: Array = state2d
    layer_inputs = []
    relu_masks = []
    last = params.n_layers - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        if layer == 1 and action2d is not None:
            if x.ndim == 3:
                act = np.broadcast_to(action2d, (x.shape[0], *action2d.shape))
                x = np.concatenate((x, act), axis=-1)
            else:
                x = np.concatenate((x, action2d), axis=-1)
        layer_inputs.append(x)
        z = x @ w + b
        if layer < last:
            x = np.maximum(z, 0.0)
            if need_cache:
                relu_masks.append(z > 0.0)
        elif spec.output_activation == "tanh":
            x = np.tanh(z)
        else:
            x = z
    out = x
    if squeezed:
        out = out[0] if out.ndim == 2 else out[:, 0]
    if not need_cache:
        return out, None
    cache = ForwardCache(params, layer_inputs, relu_masks, x, squeezed, action2d is not None)
    return out, cache


def _bt(x: Array) -> Array:
    return x.swapaxes(-1, -2)


class MlpGrads:
    """Parameter gradients in the same flat-buffer layout as MlpParams."""

    __slots__ = ("params_like",)

    def __init__(self, params_like: MlpParams):
        self.params_like = params_like

    @property
    def flat(self) -> Array:
        return self.params_like.flat

    @property
    def weights(self) -> list[Array]:
        return self.params_like.weights

    @property
    def biases(self) -> list[Array]:
        return self.params_like.biases

    def negate(self) -> "MlpGrads":
        """Flip sign in place; turns a descent step into ascent."""
        np.negative(self.flat, out=self.flat)
        return self


def backward(
    params: MlpParams,
    cache: ForwardCache,
    output_grad: Array,
    need_param_grads: bool = True,
) -> tuple[Optional[MlpGrads], Array, Optional[Array]]:
    """Exact gradients of ``sum(output * output_grad)``.

    Returns ``(param_grads, state_grad, action_grad)``. For ensembled
    parameters the input gradients keep the leading member axis; callers
    that shared one input across members sum over it.
    """
    if cache.params is not params:
        raise ValueError("cache does not belong to these parameters")
    spec = params.spec
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.squeezed:
        g = g[None, :] if g.ndim == 1 else g[:, None, :]
    if g.shape != cache.output.shape:
        g = np.broadcast_to(g, cache.output.shape)

    if spec.output_activation == "tanh":
        g = g * (1.0 - cache.output * cache.output)

    grads = None
    if need_param_grads:
        grads = MlpGrads(zeros_params(spec, params.ensemble))

    action_grad: Optional[Array] = None
    state_grad: Array
    last = params.n_layers - 1
    for layer in range(last, -1, -1):
        x = cache.layer_inputs[layer]
        if need_param_grads:
            np.add(grads.weights[layer], _bt(x) @ g, out=grads.weights[layer])
            gb = g.sum(axis=-2, keepdims=g.ndim == 3)
            np.add(grads.biases[layer], gb, out=grads.biases[layer])
        g = g @ _bt(params.weights[layer])
        if layer == 1 and cache.action_given:
            action_grad = g[..., -spec.action_dim :]
            g = g[..., : g.shape[-1] - spec.action_dim]
        if layer > 0:
            g = g * cache.relu_masks[layer - 1]
    state_grad = g

    if cache.squeezed:
        state_grad = state_grad[..., 0, :]
        if action_grad is not None:
            action_grad = action_grad[..., 0, :]
    return grads, state_grad, action_grad


@dataclass
class AdamState:
    """First/second moment accumulators matching one flat parameter buffer."""

    m: Array
    v: Array
    step_count: int = 0

    @classmethod
    def for_params(cls, params: MlpParams) -> "AdamState":
        return cls(m=np.zeros_like(params.flat), v=np.zeros_like(params.flat))


def adam_step(
    params: MlpParams,
    grads: MlpGrads,
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> bool:
    """One ADAM minimization step, in place on ``params`` and ``state``.

    Non-finite gradients skip the update entirely (params, moments and step
    count untouched) and return False so callers can flag the event.
    """
    g = grads.flat
    if not np.isfinite(g).all():
        return False
    state.step_count += 1
    t = state.step_count
    state.m *= beta1
    state.m += (1.0 - beta1) * g
    state.v *= beta2
    state.v += (1.0 - beta2) * (g * g)
    m_hat = state.m / (1.0 - beta1**t)
    v_hat = state.v / (1.0 - beta2**t)
    params.flat -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return True


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Polyak update ``target <- tau*online + (1-tau)*target``, in place on target."""
    if target.spec != online.spec or target.ensemble != online.ensemble:
        raise ValueError("target/online parameter layout mismatch")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    target.flat *= 1.0 - tau
    target.flat += tau * online.flat
    return target
