"""Dither, inverted dropout and the parallel (replica-averaged) gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .nncore import Gradients, Network, backward, backward_rows, forward, forward_rows


@dataclass(frozen=True)
class DitherSpec:
    # peak-to-peak width of the uniform noise
    amplitude: float = 1.0
    distribution: str = "uniform"

    def __post_init__(self) -> None:
        if self.distribution != "uniform":
            raise ConfigError(f"unsupported dither distribution {self.distribution!r}")
        if not (self.amplitude >= 0 and np.isfinite(self.amplitude)):
            raise ConfigError("dither amplitude must be a finite non-negative number")


@dataclass(frozen=True)
class DropoutSpec:
    rate: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {self.rate}")

    @property
    def keep_scale(self) -> float:
        return 1.0 / (1.0 - self.rate)


@dataclass(frozen=True)
class ReplicaConfig:
    count: int = 100

    def __post_init__(self) -> None:
        if int(self.count) != self.count or self.count < 1:
            raise ConfigError(f"replica count must be a positive integer, got {self.count}")


def dither(x: np.ndarray, spec: DitherSpec, rng: np.random.Generator) -> np.ndarray:
    half = spec.amplitude / 2.0
    return np.asarray(x, dtype=np.float64) + rng.uniform(-half, half, size=np.shape(x))


def sample_dropout_mask(dim: int, spec: DropoutSpec, rng: np.random.Generator) -> np.ndarray:
    if dim < 1:
        raise ConfigError("mask dimension must be at least 1")
    return _masks((dim,), spec, rng)


def _masks(shape, spec: DropoutSpec, rng: np.random.Generator) -> np.ndarray:
    keep = rng.random(shape) >= spec.rate
    return np.where(keep, spec.keep_scale, 0.0)


def replica_noise(
    net: Network,
    replicas: ReplicaConfig,
    dspec: DitherSpec,
    dropout: DropoutSpec,
    rng: np.random.Generator,
    dither_input: bool = True,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Draw the input noise and hidden masks for every replica of one step.

    Row ``k`` of each returned array belongs to replica ``k``. Draw order is
    fixed (input noise, then masks layer by layer) so the rows are a pure
    function of the generator state and ``k``.
    """
    n = replicas.count
    half = dspec.amplitude / 2.0 if dither_input else 0.0
    noise = rng.uniform(-half, half, size=(n, net.input_dim))
    masks = [_masks((n, width), dropout, rng) for width in net.hidden_dims]
    return noise, masks


def parallel_dithered_gradient(
    net: Network,
    x: np.ndarray,
    target: np.ndarray,
    replicas: ReplicaConfig,
    dspec: DitherSpec,
    dropout: DropoutSpec,
    rng: np.random.Generator,
    dither_input: bool = True,
) -> Gradients:
    """Mean gradient over ``replicas.count`` dithered, dropped-out copies of one example."""
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if x.shape != (net.input_dim,) or target.shape != (net.output_dim,):
        raise ShapeError(
            f"example shapes {x.shape}->{target.shape} do not fit network "
            f"{net.input_dim}->{net.output_dim}"
        )
    noise, masks = replica_noise(net, replicas, dspec, dropout, rng, dither_input)
    if not np.any(noise) and dropout.rate == 0.0:
        # every replica is the clean example; skip the redundant average
        _, trace = forward(net, x)
        return backward(net, trace, target)
    trace = forward_rows(net, x[None, :] + noise, masks)
    summed = backward_rows(net, trace, np.broadcast_to(target, (replicas.count, net.output_dim)))
    inv = 1.0 / replicas.count
    return Gradients([g * inv for g in summed.weights], [g * inv for g in summed.biases])
