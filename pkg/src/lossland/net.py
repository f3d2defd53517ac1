"""Small feed-forward classifier with exact manual backpropagation.

Parameters live in a single flat float64 vector laid out layer by layer as
(weights row-major, then biases). Loss is mean cross-entropy over the batch
via a numerically stable log-softmax; accuracy breaks argmax ties toward the
lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, ParamVector, RngStream

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected classifier.

    layer_sizes is (input, hidden..., output); output size >= 2. Weight
    initialization stddev is init_scale_multiplier * sqrt(2 / fan_in).
    """

    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    init_scale_multiplier: float = 1.0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError(f"need at least input and output layers, got {sizes}")
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[-1] < 2:
            raise ValueError(f"output size must be >= 2 for classification, got {sizes[-1]}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.init_scale_multiplier < 0:
            raise ValueError("init_scale_multiplier must be nonnegative")

    @property
    def param_count(self) -> int:
        return sum((fi + 1) * fo for fi, fo in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))


@dataclass(frozen=True)
class LossReport:
    cross_entropy: float
    accuracy: float
    n_examples: int


def _check_params(spec: MlpSpec, w: ParamVector) -> None:
    if w.shape[0] != spec.param_count:
        raise DimensionMismatch(spec.param_count, w.shape[0], "params vs spec")


def unpack_params(spec: MlpSpec, w: ParamVector) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of the flat vector as per-layer (W, b); W has shape (fan_in, fan_out)."""
    _check_params(spec, w)
    layers = []
    off = 0
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        W = w[off : off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = w[off : off + fan_out]
        off += fan_out
        layers.append((W, b))
    return layers


def init_params(spec: MlpSpec, stream: RngStream) -> ParamVector:
    """He-style init: weights N(0, multiplier*sqrt(2/fan_in)), biases zero."""
    w = np.zeros(spec.param_count)
    off = 0
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        stddev = spec.init_scale_multiplier * np.sqrt(2.0 / fan_in)
        w[off : off + fan_in * fan_out] = stream.gaussian_array(fan_in * fan_out, 0.0, stddev)
        off += fan_in * fan_out + fan_out  # biases stay zero
    return w


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _forward(spec: MlpSpec, w: ParamVector, inputs: np.ndarray):
    """Returns (logits, activations) where activations[i] feeds layer i."""
    layers = unpack_params(spec, w)
    acts = [np.asarray(inputs, dtype=np.float64)]
    if acts[0].ndim != 2 or acts[0].shape[1] != spec.layer_sizes[0]:
        raise DimensionMismatch(spec.layer_sizes[0], acts[0].shape[-1], "batch inputs vs spec")
    for i, (W, b) in enumerate(layers):
        z = acts[-1] @ W + b
        if i < len(layers) - 1:
            acts.append(_activate(z, spec.activation))
        else:
            logits = z
    return logits, acts


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _loss_report(logits: np.ndarray, labels: np.ndarray) -> LossReport:
    n = logits.shape[0]
    logp = _log_softmax(logits)
    ce = float(-logp[np.arange(n), labels].mean()) + 0.0  # normalize -0.0
    acc = float((logits.argmax(axis=1) == labels).mean())
    return LossReport(cross_entropy=ce, accuracy=acc, n_examples=n)


def forward_loss(spec: MlpSpec, w: ParamVector, batch) -> LossReport:
    """Mean cross-entropy and accuracy of the batch under parameters w."""
    inputs, labels = batch.inputs, batch.labels
    if len(labels) == 0:
        raise ValueError("empty batch")
    logits, _ = _forward(spec, w, inputs)
    return _loss_report(logits, labels)


def backward(spec: MlpSpec, w: ParamVector, batch) -> tuple[LossReport, ParamVector]:
    """Loss report plus exact gradient of mean cross-entropy w.r.t. every parameter."""
    inputs, labels = batch.inputs, batch.labels
    n = len(labels)
    if n == 0:
        raise ValueError("empty batch")
    logits, acts = _forward(spec, w, inputs)
    report = _loss_report(logits, labels)

    layers = unpack_params(spec, w)
    probs = np.exp(_log_softmax(logits))
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grad = np.zeros_like(w)
    grad_layers = unpack_params(spec, grad)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        gW, gb = grad_layers[i]
        gW[...] = acts[i].T @ delta
        gb[...] = delta.sum(axis=0)
        if i > 0:
            upstream = delta @ W.T
            if spec.activation == "relu":
                delta = upstream * (acts[i] > 0)
            else:
                delta = upstream * (1.0 - acts[i] ** 2)
    return report, grad
