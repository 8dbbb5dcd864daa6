"""Dense feedforward networks, exact backprop and plain SGD updates.

Weights are stored ``(fan_out, fan_in)`` so a layer computes ``W @ x + b``.
All arithmetic is float64. The batched helpers (``forward_rows`` /
``backward_rows``) treat each row of a 2-D input as an independent example;
they exist so the replica average in :mod:`plm.regularize` is one matmul
instead of a Python loop.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

SIGMOID = "sigmoid"
SOFTMAX = "softmax"
IDENTITY = "identity"
ACTIVATIONS = (SIGMOID, SOFTMAX, IDENTITY)

CROSS_ENTROPY = "cross_entropy"
MEAN_SQUARED_ERROR = "mean_squared_error"
LOSSES = (CROSS_ENTROPY, MEAN_SQUARED_ERROR)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == SIGMOID:
        return sigmoid(z)
    if kind == SOFTMAX:
        return softmax(z)
    return z.copy()


@dataclass
class DenseLayer:
    weights: np.ndarray
    biases: np.ndarray
    activation: str
    bias_trainable: bool = True

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.biases.ndim != 1:
            raise ShapeError("weights must be 2-D and biases 1-D")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ShapeError(
                f"weights have {self.weights.shape[0]} rows but biases have "
                f"{self.biases.shape[0]} entries"
            )
        if not self.bias_trainable and np.any(self.biases != 0.0):
            raise ConfigError("pinned biases must be exactly zero")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    layers: list[DenseLayer]
    loss: str

    def __post_init__(self) -> None:
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        for k, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.fan_out != b.fan_in:
                raise ShapeError(
                    f"layer {k} emits {a.fan_out} values but layer {k + 1} expects {b.fan_in}"
                )
        for layer in self.layers[:-1]:
            if layer.activation == SOFTMAX:
                raise ConfigError("softmax is only allowed on the output layer")
        out = self.layers[-1].activation
        if self.loss == CROSS_ENTROPY and out != SOFTMAX:
            raise ConfigError("cross_entropy requires a softmax output layer")
        if self.loss == MEAN_SQUARED_ERROR and out == SOFTMAX:
            raise ConfigError("mean_squared_error requires a sigmoid or identity output layer")

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [layer.fan_out for layer in self.layers]

    @property
    def hidden_dims(self) -> list[int]:
        return [layer.fan_out for layer in self.layers[:-1]]

    def n_params(self) -> int:
        """Count of trainable scalars (pinned biases excluded)."""
        return sum(
            layer.weights.size + (layer.biases.size if layer.bias_trainable else 0)
            for layer in self.layers
        )

    def copy(self) -> "Network":
        return copy.deepcopy(self)


@dataclass
class ForwardTrace:
    """Everything backward needs for one example (or one row-batch).

    ``post`` holds hidden activations *after* the dropout mask, i.e. the values
    the next layer actually saw.
    """

    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]
    masks: list[np.ndarray | None] = field(default_factory=list)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Network) -> "Gradients":
        return cls(
            [np.zeros_like(layer.weights) for layer in net.layers],
            [np.zeros_like(layer.biases) for layer in net.layers],
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


def init_network(
    dims: Sequence[int],
    activations: Sequence[str],
    loss: str,
    seed: int,
) -> Network:
    """Uniform ``±1/sqrt(fan_in)`` weights, zero biases, output bias pinned."""
    if len(dims) < 2:
        raise ConfigError("dims needs at least an input and an output size")
    if len(activations) != len(dims) - 1:
        raise ConfigError(
            f"{len(dims) - 1} weight layers but {len(activations)} activations given"
        )
    if any(int(d) < 1 for d in dims):
        raise ConfigError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    layers = []
    n_layers = len(activations)
    for k, act in enumerate(activations):
        fan_in, fan_out = int(dims[k]), int(dims[k + 1])
        limit = 1.0 / np.sqrt(fan_in)
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(
            DenseLayer(
                weights=weights,
                biases=np.zeros(fan_out),
                activation=act,
                bias_trainable=k < n_layers - 1,
            )
        )
    return Network(layers, loss)


def _check_masks(net: Network, masks, n_rows: int | None) -> list:
    if masks is None:
        return [None] * (len(net.layers) - 1)
    masks = list(masks)
    if len(masks) != len(net.layers) - 1:
        raise ShapeError(f"expected {len(net.layers) - 1} hidden masks, got {len(masks)}")
    for k, m in enumerate(masks):
        if m is None:
            continue
        want = net.layers[k].fan_out
        if m.shape[-1] != want or (n_rows is not None and m.ndim == 2 and m.shape[0] != n_rows):
            raise ShapeError(f"mask {k} has shape {m.shape}, layer width is {want}")
    return masks


def forward_rows(net: Network, X: np.ndarray, masks=None) -> ForwardTrace:
    """Forward pass over a ``(n, input_dim)`` batch of independent rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ShapeError(f"input has shape {X.shape}, network expects (*, {net.input_dim})")
    masks = _check_masks(net, masks, X.shape[0])
    pre, post = [], []
    a = X
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        z = a @ layer.weights.T + layer.biases
        a = _activate(layer.activation, z)
        if k < last and masks[k] is not None:
            a = a * masks[k]
        pre.append(z)
        post.append(a)
    return ForwardTrace(X, pre, post, masks)


def forward(net: Network, x: np.ndarray, mask=None) -> tuple[np.ndarray, ForwardTrace]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise ShapeError(f"input has shape {x.shape}, network expects ({net.input_dim},)")
    if mask is not None:
        mask = [None if m is None else np.asarray(m, dtype=np.float64)[None, :] for m in mask]
    rows = forward_rows(net, x[None, :], mask)
    trace = ForwardTrace(
        inputs=x,
        pre=[z[0] for z in rows.pre],
        post=[a[0] for a in rows.post],
        masks=[None if m is None else m[0] for m in rows.masks],
    )
    return trace.post[-1], trace


def predict(net: Network, X: np.ndarray) -> np.ndarray:
    """Eval-mode outputs for a batch; no masks, no rescaling."""
    return forward_rows(net, np.atleast_2d(X)).post[-1]


def loss_value(net: Network, output: np.ndarray, target: np.ndarray) -> float:
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape[-1] != net.output_dim or target.shape != output.shape:
        raise ShapeError(
            f"output {output.shape} / target {target.shape} do not match output_dim {net.output_dim}"
        )
    if not np.all(np.isfinite(output)):
        raise NumericError("non-finite network output")
    if net.loss == CROSS_ENTROPY:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(target != 0.0, target * np.log(output), 0.0)
        value = -float(np.sum(terms))
    else:
        value = float(np.sum((output - target) ** 2) / output.shape[-1])
    if not np.isfinite(value):
        raise NumericError("non-finite loss")
    return value


def _output_delta(net: Network, trace: ForwardTrace, T: np.ndarray) -> np.ndarray:
    out_layer = net.layers[-1]
    y = trace.post[-1]
    if net.loss == CROSS_ENTROPY:
        # softmax Jacobian folded in; target mass need not be 1
        return y * np.sum(T, axis=-1, keepdims=True) - T
    dy = 2.0 * (y - T) / y.shape[-1]
    if out_layer.activation == SIGMOID:
        return dy * y * (1.0 - y)
    return dy


def backward_rows(net: Network, trace: ForwardTrace, T: np.ndarray) -> Gradients:
    """Gradients summed over the rows of a batched trace."""
    T = np.asarray(T, dtype=np.float64)
    if len(trace.pre) != len(net.layers):
        raise ShapeError("trace depth does not match network depth")
    for layer, z in zip(net.layers, trace.pre):
        if z.shape[-1] != layer.fan_out:
            raise ShapeError("trace does not belong to this network")
    if T.shape != trace.post[-1].shape:
        raise ShapeError(f"target shape {T.shape} != output shape {trace.post[-1].shape}")

    n_layers = len(net.layers)
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = _output_delta(net, trace, T)
    for k in range(n_layers - 1, -1, -1):
        layer = net.layers[k]
        a_prev = trace.inputs if k == 0 else trace.post[k - 1]
        gw[k] = delta.T @ a_prev
        gb[k] = delta.sum(axis=0) if layer.bias_trainable else np.zeros(layer.fan_out)
        if k == 0:
            break
        below = net.layers[k - 1]
        da = delta @ layer.weights
        mask = trace.masks[k - 1] if trace.masks else None
        if mask is not None:
            da = da * mask
        if below.activation == SIGMOID:
            s = sigmoid(trace.pre[k - 1])
            delta = da * s * (1.0 - s)
        else:
            delta = da
    return Gradients(gw, gb)


def backward(net: Network, trace: ForwardTrace, target: np.ndarray) -> Gradients:
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 1 or target.shape[0] != net.output_dim:
        raise ShapeError(f"target has shape {target.shape}, expected ({net.output_dim},)")
    if trace.inputs.ndim != 1:
        raise ShapeError("backward expects a single-example trace; use backward_rows for batches")
    rows = ForwardTrace(
        inputs=trace.inputs[None, :],
        pre=[z[None, :] for z in trace.pre],
        post=[a[None, :] for a in trace.post],
        masks=[None if m is None else m[None, :] for m in trace.masks],
    )
    return backward_rows(net, rows, target[None, :])


def apply_update(net: Network, grads: Gradients, learning_rate: float) -> Network:
    """In-place SGD step ``p -= lr * g``; returns ``net`` for chaining."""
    if not learning_rate > 0:
        raise ConfigError("learning_rate must be positive")
    if len(grads.weights) != len(net.layers):
        raise ShapeError("gradient depth does not match network depth")
    for layer, gw, gb in zip(net.layers, grads.weights, grads.biases):
        if gw.shape != layer.weights.shape or gb.shape != layer.biases.shape:
            raise ShapeError("gradient shapes do not match network parameters")
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NumericError("non-finite gradient")
    for layer, gw, gb in zip(net.layers, grads.weights, grads.biases):
        layer.weights -= learning_rate * gw
        if layer.bias_trainable:
            layer.biases -= learning_rate * gb
    return net
