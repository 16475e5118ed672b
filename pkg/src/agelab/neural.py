"""Small fully-connected Q-network with hand-written backprop and Adam.

Weights are stored as ``(fan_in, fan_out)`` float64 matrices so a batch of
row-vector inputs maps through ``x @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HUBER_DELTA = 1.0
DEFAULT_LAYER_DIMS = (4, 64, 64, 2)


@dataclass(eq=False)
class QNetwork:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match layer_dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[i], self.layer_dims[i + 1]) or b.shape != (self.layer_dims[i + 1],):
                raise ValueError(f"layer {i} parameter shapes do not match layer_dims")
        # all parameters live in one contiguous vector; weights/biases are views into it
        self.flat = np.concatenate([np.asarray(p, dtype=np.float64).ravel()
                                    for p in _interleave(self.weights, self.biases)])
        self.weights, self.biases = _views(self.flat, self.layer_dims)

    @classmethod
    def initialize(cls, layer_dims=DEFAULT_LAYER_DIMS, rng=None, activation="tanh"):
        """Glorot-uniform weights, zero biases.  ``rng=None`` gives an all-zero net."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            weights.append(w)
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_dims), weights, biases, activation)

    @property
    def n_actions(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order ``[W0, b0, W1, b1, ...]`` (views)."""
        return list(_interleave(self.weights, self.biases))

    def n_parameters(self) -> int:
        return self.flat.size

    # copies and pickles must rebuild the views, not duplicate them
    def __reduce__(self):
        return (QNetwork, (self.layer_dims, self.weights, self.biases, self.activation))

    def __deepcopy__(self, memo):
        return QNetwork(self.layer_dims, self.weights, self.biases, self.activation)


def _interleave(weights, biases):
    for w, b in zip(weights, biases):
        yield w
        yield b


def _views(flat: np.ndarray, layer_dims) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    offset = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        weights.append(flat[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out))
        offset += fan_in * fan_out
        biases.append(flat[offset:offset + fan_out])
        offset += fan_out
    return weights, biases


def flatten(arrays) -> np.ndarray:
    """Concatenate parameter-shaped arrays in ``parameters()`` order."""
    return np.concatenate([np.ravel(a) for a in arrays])


def _act(net: QNetwork, z: np.ndarray) -> np.ndarray:
    return np.tanh(z) if net.activation == "tanh" else np.maximum(z, 0.0)


def _act_grad(net: QNetwork, a: np.ndarray) -> np.ndarray:
    # expressed through the activation output a
    return 1.0 - a * a if net.activation == "tanh" else (a > 0.0).astype(a.dtype)


def forward(net: QNetwork, observation: np.ndarray) -> np.ndarray:
    """Q-values for one observation (shape ``(d,)``) or a batch (``(n, d)``)."""
    x = np.asarray(observation, dtype=np.float64)
    if x.shape[-1] != net.layer_dims[0]:
        raise ValueError(f"expected input dimension {net.layer_dims[0]}, got {x.shape[-1]}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = x @ w + b
        if i < last:
            x = _act(net, x)
    return x


def _forward_cached(net: QNetwork, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w + b
        acts.append(_act(net, z) if i < last else z)
    return acts


def _backward(net: QNetwork, acts: list[np.ndarray], grad_out: np.ndarray, need_input=False):
    """Backprop ``grad_out`` (dL/dQ) through cached activations."""
    n_layers = len(net.weights)
    grads: list[np.ndarray] = [None] * (2 * n_layers)  # type: ignore[list-item]
    delta = grad_out
    for i in range(n_layers - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0 or need_input:
            delta = delta @ net.weights[i].T
            if i > 0:
                delta = delta * _act_grad(net, acts[i])
    return grads, delta


def huber(residual: np.ndarray, delta: float = HUBER_DELTA) -> np.ndarray:
    a = np.abs(residual)
    return np.where(a <= delta, 0.5 * residual * residual, delta * (a - 0.5 * delta))


def loss_and_gradients(net: QNetwork, observations, actions, td_targets, weights=None,
                       return_residuals=False):
    """Mean Huber loss between ``Q(s, a)`` and ``td_targets`` and its exact gradient.

    ``weights`` are optional per-sample importance weights multiplying each
    loss term.  The gradient list follows ``net.parameters()`` order.
    """
    x = np.asarray(observations, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    actions = np.asarray(actions, dtype=np.int64).reshape(-1)
    td_targets = np.asarray(td_targets, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if actions.shape[0] != n or td_targets.shape[0] != n:
        raise ValueError("batch arrays have inconsistent lengths")

    acts = _forward_cached(net, x)
    rows = np.arange(n)
    residual = acts[-1][rows, actions] - td_targets
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    loss = float(np.mean(w * huber(residual)))

    grad_out = np.zeros_like(acts[-1])
    grad_out[rows, actions] = w * np.clip(residual, -HUBER_DELTA, HUBER_DELTA) / n
    grads, _ = _backward(net, acts, grad_out)
    if return_residuals:
        return loss, grads, residual
    return loss, grads


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def input_gradient(net: QNetwork, observation, target_action: int) -> np.ndarray:
    """Gradient w.r.t. the observation of cross-entropy(softmax(Q), one_hot(target))."""
    if not 0 <= target_action < net.n_actions:
        raise ValueError(f"invalid action index {target_action}")
    x = np.asarray(observation, dtype=np.float64).reshape(1, -1)
    acts = _forward_cached(net, x)
    grad_out = softmax(acts[-1])
    grad_out[0, target_action] -= 1.0
    _, dx = _backward(net, acts, grad_out, need_input=True)
    return dx[0]


def clone(net: QNetwork) -> QNetwork:
    return QNetwork(net.layer_dims, net.weights, net.biases, net.activation)


def soft_copy(target: QNetwork, source: QNetwork, tau: float = 1.0) -> QNetwork:
    """Move ``target`` toward ``source`` in place; ``tau=1`` is a hard copy."""
    if target.layer_dims != source.layer_dims:
        raise ValueError("networks have different shapes")
    if tau == 1.0:
        target.flat[...] = source.flat
    else:
        target.flat *= 1.0 - tau
        target.flat += tau * source.flat
    return target


@dataclass
class OptimizerState:
    """Adam first/second moments over the flattened parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_network(cls, net: QNetwork, learning_rate: float = 1e-3, **kwargs):
        return cls(np.zeros_like(net.flat), np.zeros_like(net.flat),
                   learning_rate=learning_rate, **kwargs)


def optimizer_step(net: QNetwork, state: OptimizerState, gradients,
                   max_grad_norm: float | None = None) -> tuple[QNetwork, OptimizerState]:
    """One bias-corrected Adam update, applied in place.

    ``gradients`` is either a list in ``parameters()`` order or an already
    flattened vector.  ``max_grad_norm`` rescales the gradient to at most that
    global L2 norm first.
    """
    params = net.parameters()
    if isinstance(gradients, np.ndarray) and gradients.ndim == 1:
        g = gradients
    else:
        if len(gradients) != len(params):
            raise ValueError("gradient list does not match network parameters")
        for p, grad in zip(params, gradients):
            if p.shape != np.shape(grad):
                raise ValueError(f"shape mismatch: parameter {p.shape}, gradient {np.shape(grad)}")
        g = flatten(gradients)
    if g.shape != net.flat.shape or state.m.shape != net.flat.shape:
        raise ValueError("gradient / moment shapes do not match the network")
    if max_grad_norm is not None:
        norm = float(np.sqrt(g @ g))
        if norm > max_grad_norm:
            g = g * (max_grad_norm / norm)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    lr_t = state.learning_rate * np.sqrt(1.0 - b2**state.step) / (1.0 - b1**state.step)
    eps_t = state.eps * np.sqrt(1.0 - b2**state.step)
    state.m *= b1
    state.m += (1.0 - b1) * g
    state.v *= b2
    state.v += (1.0 - b2) * g * g
    net.flat -= lr_t * state.m / (np.sqrt(state.v) + eps_t)
    return net, state
