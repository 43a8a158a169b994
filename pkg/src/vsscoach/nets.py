"""Dense networks with exact backprop, Adam updates, target syncs and a
versioned binary checkpoint format. Double precision throughout."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")

CHECKPOINT_MAGIC = b"DNET"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint stream problems."""


class CheckpointVersionError(CheckpointError):
    """Unknown magic bytes or unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """Stream ended before the declared parameters."""


class CheckpointIntegrityError(CheckpointError):
    """Shape chain, activation tag or trailing bytes are inconsistent."""


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError("bias length must match weight rows")


@dataclass
class Network:
    layers: list[Layer]

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weights.shape[0] != nxt.weights.shape[1]:
                raise ValueError("layer dimensions do not chain")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    def copy(self) -> "Network":
        return Network([Layer(l.weights.copy(), l.bias.copy(), l.activation)
                        for l in self.layers])

    def architecture(self) -> tuple[tuple[int, int, str], ...]:
        return tuple((l.weights.shape[0], l.weights.shape[1], l.activation)
                     for l in self.layers)


@dataclass
class Gradients:
    """Per-parameter partials, shape-congruent with a Network."""

    layers: list[tuple[np.ndarray, np.ndarray]]  # (dW, db) per layer


def init_network(dims: list[int], activations: list[str],
                 rng: np.random.Generator) -> Network:
    """Uniform +-1/sqrt(fan_in) weights, zero biases."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(dims, dims[1:], activations):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return Network(layers)


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    return z


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Single-input forward pass; `x` has shape (input_dim,)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise ValueError(f"expected input of shape ({net.input_dim},), got {x.shape}")
    a = x
    for layer in net.layers:
        a = _activate(layer.weights @ a + layer.bias, layer.activation)
    return a


def forward_batch(net: Network, X: np.ndarray) -> np.ndarray:
    """Batched forward pass; `X` has shape (batch, input_dim)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ValueError(f"expected (batch, {net.input_dim}) input, got {X.shape}")
    A = X
    for layer in net.layers:
        A = _activate(A @ layer.weights.T + layer.bias, layer.activation)
    return A


def backward(net: Network, x: np.ndarray,
             output_grad: np.ndarray) -> tuple[Gradients, np.ndarray]:
    """Reverse-mode gradients of output_grad . output w.r.t. all parameters.

    Also returns the gradient w.r.t. the input (needed when a network's
    output feeds another network).
    """
    grads, dX = backward_batch(net, np.asarray(x, dtype=np.float64)[None, :],
                               np.asarray(output_grad, dtype=np.float64)[None, :])
    return grads, dX[0]


def backward_batch(net: Network, X: np.ndarray,
                   output_grad: np.ndarray) -> tuple[Gradients, np.ndarray]:
    """Batched reverse mode; gradients are summed over the batch."""
    X = np.asarray(X, dtype=np.float64)
    G = np.asarray(output_grad, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ValueError(f"expected (batch, {net.input_dim}) input, got {X.shape}")
    if G.shape != (X.shape[0], net.output_dim):
        raise ValueError("output_grad shape does not match the network output")

    inputs = []   # activation entering each layer
    post = []     # activation leaving each layer
    A = X
    for layer in net.layers:
        inputs.append(A)
        A = _activate(A @ layer.weights.T + layer.bias, layer.activation)
        post.append(A)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    D = G
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if layer.activation == "relu":
            D = D * (post[i] > 0.0)
        elif layer.activation == "tanh":
            D = D * (1.0 - post[i] ** 2)
        grads[i] = (D.T @ inputs[i], D.sum(axis=0))
        D = D @ layer.weights
    return Gradients(grads), D


@dataclass
class AdamState:
    """Adaptive-moment accumulators, one (m, v) pair per parameter array."""

    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float
    step: int
    moments: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]  # mW, vW, mb, vb


def adam_init(net: Network, learning_rate: float, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    moments = [(np.zeros_like(l.weights), np.zeros_like(l.weights),
                np.zeros_like(l.bias), np.zeros_like(l.bias))
               for l in net.layers]
    return AdamState(learning_rate, beta1, beta2, epsilon, 0, moments)


def adam_update(net: Network, grads: Gradients, opt: AdamState) -> tuple[Network, AdamState]:
    """One Adam step, applied in place; returns (net, opt) for chaining."""
    if len(grads.layers) != len(net.layers):
        raise ValueError("gradient/network layer count mismatch")
    for i, (dw, db) in enumerate(grads.layers):
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise ValueError(f"non-finite gradient in layer {i}; update rejected")
        if dw.shape != net.layers[i].weights.shape or db.shape != net.layers[i].bias.shape:
            raise ValueError(f"gradient shape mismatch in layer {i}")
    opt.step += 1
    lr, b1, b2, eps = opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon
    bc1 = 1.0 - b1 ** opt.step
    bc2 = 1.0 - b2 ** opt.step
    for layer, (dw, db), (mw, vw, mb, vb) in zip(net.layers, grads.layers, opt.moments):
        mw *= b1
        mw += (1.0 - b1) * dw
        vw *= b2
        vw += (1.0 - b2) * dw * dw
        layer.weights -= lr * (mw / bc1) / (np.sqrt(vw / bc2) + eps)
        mb *= b1
        mb += (1.0 - b1) * db
        vb *= b2
        vb += (1.0 - b2) * db * db
        layer.bias -= lr * (mb / bc1) / (np.sqrt(vb / bc2) + eps)
    return net, opt


def _check_congruent(target: Network, online: Network) -> None:
    if target.architecture() != online.architecture():
        raise ValueError("target/online architectures differ")


def hard_sync(target: Network, online: Network) -> Network:
    """target' = online, by value (no aliasing)."""
    _check_congruent(target, online)
    return online.copy()


def soft_sync(target: Network, online: Network, tau: float) -> Network:
    """target' = tau * online + (1 - tau) * target, element-wise."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    _check_congruent(target, online)
    layers = []
    for t, o in zip(target.layers, online.layers):
        layers.append(Layer(tau * o.weights + (1.0 - tau) * t.weights,
                            tau * o.bias + (1.0 - tau) * t.bias,
                            t.activation))
    return Network(layers)


def save_params(net: Network) -> bytes:
    """Serialize: magic, version, layer shapes + activation tags, then the
    parameters in declared order (float64 little-endian, row-major)."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(net.layers))]
    for layer in net.layers:
        out_dim, in_dim = layer.weights.shape
        parts.append(struct.pack("<IIB", out_dim, in_dim,
                                 ACTIVATIONS.index(layer.activation)))
    for layer in net.layers:
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    return b"".join(parts)


class _StreamReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointTruncatedError(
                f"stream ends at byte {len(self.data)}, needed {self.pos + n}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def done(self) -> bool:
        return self.pos == len(self.data)


def load_params(data: bytes) -> Network:
    """Inverse of save_params; raises distinct CheckpointErrors on bad input."""
    r = _StreamReader(data)
    magic = r.read(4)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointVersionError(f"bad magic {magic!r}")
    version, n_layers = struct.unpack("<II", r.read(8))
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported format version {version}")
    shapes = []
    for _ in range(n_layers):
        out_dim, in_dim, act_idx = struct.unpack("<IIB", r.read(9))
        if act_idx >= len(ACTIVATIONS):
            raise CheckpointIntegrityError(f"unknown activation tag {act_idx}")
        shapes.append((out_dim, in_dim, ACTIVATIONS[act_idx]))
    for (out_a, _, _), (_, in_b, _) in zip(shapes, shapes[1:]):
        if out_a != in_b:
            raise CheckpointIntegrityError("layer shapes do not chain")
    layers = []
    for out_dim, in_dim, act in shapes:
        w = np.frombuffer(r.read(8 * out_dim * in_dim), dtype="<f8")
        b = np.frombuffer(r.read(8 * out_dim), dtype="<f8")
        layers.append(Layer(w.reshape(out_dim, in_dim).copy(), b.copy(), act))
    if not r.done():
        raise CheckpointIntegrityError("trailing bytes after parameters")
    return Network(layers)
