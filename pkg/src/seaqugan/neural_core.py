"""Small dense-network engine: forward/backward passes, BCE, Adam.

Parameters of a model live in one flat float64 vector, laid out layer by
layer with the weight matrix (row-major, shape ``out x in``) before the bias
vector. Adam state indexes the same vector.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

LEAKY_SLOPE = 0.01
BCE_CLAMP = 1e-7

CHECKPOINT_MAGIC = b"MLP1"


class Activation(str, enum.Enum):
    LEAKY_RELU = "LeakyReLU"
    RELU = "ReLU"
    SIGMOID = "Sigmoid"
    NONE = "None"


def _activate(kind: Activation, x: np.ndarray) -> np.ndarray:
    if kind is Activation.LEAKY_RELU:
        return np.where(x > 0, x, LEAKY_SLOPE * x)
    if kind is Activation.RELU:
        return np.maximum(x, 0.0)
    if kind is Activation.SIGMOID:
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    return x


def _activation_grad(kind: Activation, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    if kind is Activation.LEAKY_RELU:
        return np.where(pre > 0, 1.0, LEAKY_SLOPE)
    if kind is Activation.RELU:
        return (pre > 0).astype(float)
    if kind is Activation.SIGMOID:
        return out * (1.0 - out)
    return np.ones_like(pre)


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    params: np.ndarray
    hidden_activation: Activation = Activation.LEAKY_RELU
    output_activation: Activation = Activation.NONE

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        self.hidden_activation = Activation(self.hidden_activation)
        self.output_activation = Activation(self.output_activation)
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {self.params.shape}")

    @property
    def n_params(self) -> int:
        return count_params(self.layer_sizes)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def _offsets(self, k: int) -> tuple[int, int, int]:
        start = count_params(self.layer_sizes[: k + 1])
        n_in, n_out = self.layer_sizes[k], self.layer_sizes[k + 1]
        return start, start + n_in * n_out, start + n_in * n_out + n_out

    def weights(self, k: int) -> np.ndarray:
        start, mid, _ = self._offsets(k)
        return self.params[start:mid].reshape(self.layer_sizes[k + 1], self.layer_sizes[k])

    def biases(self, k: int) -> np.ndarray:
        _, mid, end = self._offsets(k)
        return self.params[mid:end]

    def activation(self, k: int) -> Activation:
        return self.output_activation if k == self.n_layers - 1 else self.hidden_activation

    def with_params(self, params: np.ndarray) -> "MlpModel":
        return replace(self, params=np.array(params, dtype=float))


def count_params(layer_sizes) -> int:
    sizes = list(layer_sizes)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_params(layer_sizes, rng: np.random.Generator, output_bias: float = 0.0) -> np.ndarray:
    """Uniform(+-sqrt(1/fan_in)) weights; zero biases except an optional output-bias fill."""
    chunks = []
    sizes = list(layer_sizes)
    for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = np.sqrt(1.0 / n_in)
        chunks.append(rng.uniform(-bound, bound, size=n_in * n_out))
        fill = output_bias if k == len(sizes) - 2 else 0.0
        chunks.append(np.full(n_out, fill))
    return np.concatenate(chunks)


def build_discriminator(rng: np.random.Generator | None = None) -> MlpModel:
    sizes = (6, 16, 1)
    params = np.zeros(count_params(sizes)) if rng is None else init_params(sizes, rng)
    return MlpModel(sizes, params, Activation.LEAKY_RELU, Activation.SIGMOID)


def build_classical_generator(rng: np.random.Generator | None = None, output_bias: float = 0.0) -> MlpModel:
    sizes = (6, 10, 6)
    if rng is None:
        params = np.zeros(count_params(sizes))
    else:
        params = init_params(sizes, rng, output_bias=output_bias)
    return MlpModel(sizes, params, Activation.LEAKY_RELU, Activation.RELU)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)
    single: bool = False


def forward(model: MlpModel, x) -> tuple[np.ndarray, ForwardCache]:
    """Run ``x`` (shape ``(in,)`` or ``(batch, in)``) through the network."""
    x = np.asarray(x, dtype=float)
    cache = ForwardCache(single=x.ndim == 1)
    h = np.atleast_2d(x)
    if h.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"input has {h.shape[1]} features, model expects {model.layer_sizes[0]}")
    for k in range(model.n_layers):
        cache.inputs.append(h)
        pre = h @ model.weights(k).T + model.biases(k)
        h = _activate(model.activation(k), pre)
        cache.pre.append(pre)
        cache.outputs.append(h)
    return (h[0] if cache.single else h), cache


@dataclass
class GradientTape:
    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)


def backward(model: MlpModel, cache: ForwardCache, upstream) -> GradientTape:
    """Reverse-mode gradients of ``sum(upstream * output)``, summed over the batch."""
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    expected = cache.outputs[-1].shape
    if g.shape != expected:
        raise ValueError(f"upstream shape {g.shape} does not match output shape {expected}")
    w_grads, b_grads = [], []
    for k in reversed(range(model.n_layers)):
        g = g * _activation_grad(model.activation(k), cache.pre[k], cache.outputs[k])
        w_grads.append(g.T @ cache.inputs[k])
        b_grads.append(g.sum(axis=0))
        g = g @ model.weights(k)
    input_grad = g[0] if cache.single else g
    return GradientTape(w_grads[::-1], b_grads[::-1], input_grad)


def bce_loss(d, y) -> tuple[np.ndarray, np.ndarray]:
    """Binary cross-entropy and its derivative w.r.t. ``d``.

    ``d`` is clamped to ``[BCE_CLAMP, 1 - BCE_CLAMP]`` first.
    """
    d = np.clip(np.asarray(d, dtype=float), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = np.asarray(y, dtype=float)
    loss = -(y * np.log(d) + (1.0 - y) * np.log1p(-d))
    grad = (d - y) / (d * (1.0 - d))
    return loss, grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, n: int, lr: float, **kwargs) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, lr, **kwargs)


def adam_step(state: AdamState, params, grads) -> tuple[np.ndarray, AdamState]:
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_params, replace(state, m=m, v=v, t=t)


# ---------------------------------------------------------------------------
# checkpoints
#
# Layout (little-endian): b"MLP1", uint32 K, K x uint32 layer sizes,
# then count_params(sizes) float64 values in the flat parameter order.

def save_checkpoint(model: MlpModel, path) -> None:
    sizes = model.layer_sizes
    header = CHECKPOINT_MAGIC + struct.pack(f"<I{len(sizes)}I", len(sizes), *sizes)
    Path(path).write_bytes(header + model.params.astype("<f8").tobytes())


def load_checkpoint(path, hidden_activation=Activation.LEAKY_RELU, output_activation=Activation.NONE) -> MlpModel:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an MLP checkpoint")
    (k,) = struct.unpack_from("<I", raw, 4)
    sizes = struct.unpack_from(f"<{k}I", raw, 8)
    params = np.frombuffer(raw, dtype="<f8", offset=8 + 4 * k)
    return MlpModel(sizes, params.astype(float), hidden_activation, output_activation)
