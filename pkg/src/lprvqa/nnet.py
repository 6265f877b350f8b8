"""Small dense networks with hand-written backprop, SGD with momentum and EMA.

Everything operates on float64 numpy arrays. A network's parameters are
exposed as a flat list ``[W0, b0, W1, b1, ...]`` of the live arrays, so
optimizers and the EMA update mutate them in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "identity")


class NonFiniteGradientError(FloatingPointError):
    pass


def sigmoid(x):
    # exp(-|x|) never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _activate(kind, pre):
    if kind == "relu":
        return np.maximum(pre, 0.0)
    if kind == "sigmoid":
        return sigmoid(pre)
    return pre


def _activation_grad(kind, out):
    # derivative expressed through the layer output
    if kind == "relu":
        return (out > 0.0).astype(out.dtype)
    if kind == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(out)


@dataclass
class Dense:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("bias must match the weight's output dimension")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class ForwardCache:
    net_id: int
    shapes: tuple
    inputs: list
    outputs: list
    squeeze: bool


class DenseNet:
    """Feed-forward stack of affine layers, each followed by an activation."""

    def __init__(self, layers: list[Dense]):
        if not layers:
            raise ValueError("a network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.layers = layers

    @classmethod
    def init(cls, sizes, activations, rng: np.random.Generator) -> "DenseNet":
        """Glorot-uniform weights and zero biases.

        ``sizes`` lists the layer widths including the input, so
        ``len(activations) == len(sizes) - 1``.
        """
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
            limit = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-limit, limit, size=(n_out, n_in))
            layers.append(Dense(w, np.zeros(n_out), act))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def shapes(self) -> tuple:
        return tuple(p.shape for p in self.params())

    def copy(self) -> "DenseNet":
        return DenseNet(
            [Dense(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def forward(self, x):
        """Apply the network to one vector or a batch of row vectors."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"input dimension {x.shape[-1]} does not match network input {self.in_dim}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite network input")
        inputs, outputs = [], []
        h = x
        for layer in self.layers:
            inputs.append(h)
            h = _activate(layer.activation, h @ layer.weight.T + layer.bias)
            outputs.append(h)
        cache = ForwardCache(id(self), self.shapes(), inputs, outputs, squeeze)
        return (h[0] if squeeze else h), cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache: ForwardCache, grad_out):
        """Return (parameter gradients aligned with ``params()``, input gradient)."""
        if cache.net_id != id(self) or cache.shapes != self.shapes():
            raise ValueError("forward cache does not belong to this network")
        g = np.asarray(grad_out, dtype=np.float64)
        if cache.squeeze:
            g = g[None, :]
        if g.shape != cache.outputs[-1].shape:
            raise ValueError("output gradient shape does not match the forward output")
        grads = [None] * (2 * len(self.layers))
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            g = g * _activation_grad(layer.activation, cache.outputs[i])
            grads[2 * i] = g.T @ cache.inputs[i]
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.weight
        return grads, (g[0] if cache.squeeze else g)


@dataclass
class OptimizerState:
    learning_rate0: float = 0.1
    decay: float = 0.01
    momentum: float = 0.9
    iteration: int = 0
    velocity: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.learning_rate0 <= 0:
            raise ValueError("learning_rate0 must be positive")
        if self.decay < 0:
            raise ValueError("decay must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    def learning_rate(self, n: int | None = None) -> float:
        """Inverse-time schedule lr0 / (1 + decay * n)."""
        n = self.iteration if n is None else n
        return self.learning_rate0 / (1.0 + self.decay * n)


def sgd_step(params, grads, state: OptimizerState):
    """In-place heavy-ball step: v <- m v + g; theta <- theta - lr(n) v."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient at iteration {state.iteration}")
    if state.velocity is None:
        state.velocity = [np.zeros_like(p) for p in params]
    lr = state.learning_rate()
    for p, g, v in zip(params, grads, state.velocity):
        v *= state.momentum
        v += g
        p -= lr * v
    state.iteration += 1
    return params, state


def ema_update(teacher_params, student_params, alpha: float):
    """theta_t <- alpha * theta_t + (1 - alpha) * theta_s, in place."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if len(teacher_params) != len(student_params):
        raise ValueError("teacher and student have different parameter counts")
    for t, s in zip(teacher_params, student_params):
        if t.shape != s.shape:
            raise ValueError(f"shape mismatch {t.shape} vs {s.shape}")
    for t, s in zip(teacher_params, student_params):
        t *= alpha
        t += (1.0 - alpha) * s
    return teacher_params


def copy_params(dst_params, src_params):
    for d, s in zip(dst_params, src_params):
        d[...] = s


# Checkpoints are .npz archives. For a network stored under prefix "f", the
# entries are f.0.weight, f.0.bias, f.0.activation, f.1.weight, ... in layer
# order, with weights shaped (out, in).


def net_to_arrays(net: DenseNet, prefix: str) -> dict:
    out = {}
    for i, layer in enumerate(net.layers):
        out[f"{prefix}.{i}.weight"] = layer.weight
        out[f"{prefix}.{i}.bias"] = layer.bias
        out[f"{prefix}.{i}.activation"] = np.array(layer.activation)
    return out


def net_from_arrays(arrays, prefix: str) -> DenseNet:
    layers = []
    i = 0
    while f"{prefix}.{i}.weight" in arrays:
        layers.append(
            Dense(
                np.array(arrays[f"{prefix}.{i}.weight"], dtype=np.float64),
                np.array(arrays[f"{prefix}.{i}.bias"], dtype=np.float64),
                str(arrays[f"{prefix}.{i}.activation"]),
            )
        )
        i += 1
    if not layers:
        raise KeyError(f"no layers stored under prefix {prefix!r}")
    return DenseNet(layers)


def save_net(net: DenseNet, path):
    np.savez(Path(path), **net_to_arrays(net, "net"))


def load_net(path) -> DenseNet:
    with np.load(Path(path)) as data:
        return net_from_arrays(dict(data), "net")
