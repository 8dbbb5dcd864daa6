"""The Perpetual Learning Machine: a storage/recall network pair, the biased
class sampler, pretraining, the self-supervised PSGD loop and per-group
evaluation.

Randomness is split into independent streams, each a pure function of a
seed and a step counter, so any iteration can be replayed in isolation:

* network init: ``init_seed`` (storage) and ``init_seed + 1`` (recall)
* class sampling: ``(sampler_seed, iteration)``
* pretraining sweep order: ``(sampler_seed, epoch)`` on a separate stream
* dither and dropout: ``(dither_seed, network stream, step)``
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import checkpoint
from .data import GROUP_SIZE, N_CLASSES, N_GROUPS, PIXELS, Dataset75, GroupAssignment, one_hot, zero_mean
from .errors import ConfigError, NumericError, ShapeError
from .nncore import (
    CROSS_ENTROPY,
    MEAN_SQUARED_ERROR,
    SIGMOID,
    SOFTMAX,
    Network,
    apply_update,
    init_network,
    predict,
)
from .regularize import DitherSpec, DropoutSpec, ReplicaConfig, parallel_dithered_gradient

log = logging.getLogger(__name__)

HIDDEN = 100
STORAGE_STREAM = 1
RECALL_STREAM = 2
_SAMPLER_STREAM = 10
_SWEEP_STREAM = 11


@dataclass(frozen=True)
class BiasSchedule:
    p1: float
    p2: float
    p3: float

    def __post_init__(self) -> None:
        probs = self.probs
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ConfigError(f"group probabilities must be non-negative, got {tuple(probs)}")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigError(f"group probabilities must sum to 1, got {probs.sum()!r}")

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3], dtype=np.float64)

    def label(self) -> str:
        return ",".join(f"{p:g}" for p in (self.p1, self.p2, self.p3))


LEARNING_BIAS = BiasSchedule(0.80, 0.15, 0.05)
FORGETTING_BIAS = BiasSchedule(0.99, 0.01, 0.0)


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    # MSE averages over 784 pixels, so the recall net needs a far larger step
    recall_learning_rate: float = 300.0
    replicas: ReplicaConfig = field(default_factory=ReplicaConfig)
    dither: DitherSpec = field(default_factory=DitherSpec)
    dropout: DropoutSpec = field(default_factory=DropoutSpec)
    dither_class_input: bool = False
    dither_seed: int = 3

    def __post_init__(self) -> None:
        for name in ("learning_rate", "recall_learning_rate"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise ConfigError(f"{name} must be a positive finite number")


def stream_rng(seed: int, stream: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, step])


@dataclass
class PlmPair:
    storage: Network
    recall: Network

    def __post_init__(self) -> None:
        s, r = self.storage, self.recall
        if s.input_dim != PIXELS or r.output_dim != PIXELS:
            raise ShapeError("storage input and recall output must both be 784 wide")
        if s.output_dim != N_CLASSES or r.input_dim != N_CLASSES:
            raise ShapeError("storage output and recall input must both be 75 wide")

    def copy(self) -> "PlmPair":
        return PlmPair(self.storage.copy(), self.recall.copy())


def new_pair(init_seed: int = 1) -> PlmPair:
    storage = init_network([PIXELS, HIDDEN, N_CLASSES], [SIGMOID, SOFTMAX], CROSS_ENTROPY, init_seed)
    recall = init_network([N_CLASSES, HIDDEN, PIXELS], [SIGMOID, SIGMOID], MEAN_SQUARED_ERROR, init_seed + 1)
    return PlmPair(storage, recall)


def save_checkpoint(plm: PlmPair, path: str | os.PathLike) -> None:
    checkpoint.save_networks([plm.storage, plm.recall], path)


def load_checkpoint(path: str | os.PathLike) -> PlmPair:
    storage, recall = checkpoint.load_networks(path, 2)
    try:
        return PlmPair(storage, recall)
    except ShapeError as exc:
        raise checkpoint.FormatError(f"checkpoint does not hold a 784/75 PLM pair: {exc}") from exc


# -- sampling and synthesis ---------------------------------------------------


def sample_class(bias: BiasSchedule, groups: GroupAssignment, rng: np.random.Generator) -> int:
    group = int(rng.choice(N_GROUPS, p=bias.probs)) + 1
    members = groups.members(group)
    return int(members[rng.integers(len(members))])


def synthesize(recall: Network, cls: int) -> np.ndarray:
    return predict(recall, one_hot(cls, recall.input_dim))[0]


# -- single training steps ----------------------------------------------------


def _check_finite(net: Network, what: str) -> None:
    for layer in net.layers:
        if not np.all(np.isfinite(layer.weights)) or not np.all(np.isfinite(layer.biases)):
            raise NumericError(f"{what} parameters became non-finite")


def train_step_storage(
    storage: Network,
    image: np.ndarray,
    cls: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> Network:
    """One replica-averaged SGD step on ``zero_mean(image) -> cls``."""
    grads = parallel_dithered_gradient(
        storage,
        zero_mean(image),
        one_hot(cls, storage.output_dim),
        cfg.replicas,
        cfg.dither,
        cfg.dropout,
        rng,
    )
    apply_update(storage, grads, cfg.learning_rate)
    _check_finite(storage, "storage")
    return storage


def train_step_recall(
    recall: Network,
    cls: int,
    target_image: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> Network:
    grads = parallel_dithered_gradient(
        recall,
        one_hot(cls, recall.input_dim),
        target_image,
        cfg.replicas,
        cfg.dither,
        cfg.dropout,
        rng,
        dither_input=cfg.dither_class_input,
    )
    apply_update(recall, grads, cfg.recall_learning_rate)
    _check_finite(recall, "recall")
    return recall


# -- evaluation ---------------------------------------------------------------


def classify(storage: Network, images: np.ndarray) -> np.ndarray:
    # np.argmax resolves ties to the lowest index
    return np.argmax(predict(storage, zero_mean(images)), axis=1)


def evaluate_groups(storage: Network, data: Dataset75, groups: GroupAssignment) -> tuple[float, float, float]:
    wrong = classify(storage, data.images) != np.arange(N_CLASSES)
    g = groups.as_array()
    return tuple(float(np.count_nonzero(wrong[g == k])) / GROUP_SIZE for k in (1, 2, 3))  # type: ignore[return-value]


def synthesize_all(recall: Network) -> np.ndarray:
    return predict(recall, np.eye(recall.input_dim))


def storage_errors(plm: PlmPair, data: Dataset75) -> int:
    """Misclassified original images, out of 75."""
    return int(np.count_nonzero(classify(plm.storage, data.images) != np.arange(N_CLASSES)))


def recall_errors(plm: PlmPair) -> int:
    """Classes whose synthesized image the storage net labels wrongly, out of 75."""
    return int(np.count_nonzero(classify(plm.storage, synthesize_all(plm.recall)) != np.arange(N_CLASSES)))


# -- metrics ------------------------------------------------------------------


@dataclass
class MetricsLog:
    rows: list[tuple[int, float, float, float]] = field(default_factory=list)

    def append(self, iteration: int, errs) -> None:
        if self.rows and iteration <= self.rows[-1][0]:
            raise ValueError(f"iteration {iteration} does not follow {self.rows[-1][0]}")
        e1, e2, e3 = (float(e) for e in errs)
        self.rows.append((int(iteration), e1, e2, e3))

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[tuple[int, float, float, float]]:
        return iter(self.rows)

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows], dtype=np.int64)

    @property
    def errors(self) -> np.ndarray:
        """``(n_rows, 3)`` array of per-group error rates."""
        return np.array([r[1:] for r in self.rows], dtype=np.float64).reshape(-1, 3)


class DivergenceError(NumericError):
    """A run blew up; ``log`` holds every row recorded before it did."""

    def __init__(self, message: str, iteration: int, log: MetricsLog):
        super().__init__(message, iteration)
        self.log = log


# -- pretraining and PSGD -----------------------------------------------------


def pretrain(
    plm: PlmPair,
    data: Dataset75,
    epochs: int,
    cfg: TrainConfig,
    order_seed: int = 2,
    progress: Callable[[int, PlmPair], None] | None = None,
) -> PlmPair:
    """Unbiased full sweeps over the real images, training both networks."""
    if epochs < 0:
        raise ConfigError("epochs must be non-negative")
    step = 0
    for epoch in range(epochs):
        order = stream_rng(order_seed, _SWEEP_STREAM, epoch).permutation(N_CLASSES)
        for cls in order:
            image = data.images[cls]
            try:
                train_step_storage(plm.storage, image, int(cls), cfg, stream_rng(cfg.dither_seed, STORAGE_STREAM, step))
                train_step_recall(plm.recall, int(cls), image, cfg, stream_rng(cfg.dither_seed, RECALL_STREAM, step))
            except NumericError as exc:
                raise NumericError(f"pretraining diverged in epoch {epoch}: {exc}", step) from exc
            step += 1
        if progress is not None:
            progress(epoch + 1, plm)
    return plm


@dataclass
class PsgdState:
    plm: PlmPair
    groups: GroupAssignment
    bias: BiasSchedule
    sampler_seed: int
    iteration: int = 0
    last_class: int | None = None


def psgd_step(state: PsgdState, cfg: TrainConfig) -> PsgdState:
    """Recall a random class from memory and train both networks on it."""
    t = state.iteration
    cls = sample_class(state.bias, state.groups, stream_rng(state.sampler_seed, _SAMPLER_STREAM, t))
    image = synthesize(state.plm.recall, cls)
    try:
        train_step_storage(state.plm.storage, image, cls, cfg, stream_rng(cfg.dither_seed, STORAGE_STREAM, t))
        train_step_recall(state.plm.recall, cls, image, cfg, stream_rng(cfg.dither_seed, RECALL_STREAM, t))
    except NumericError as exc:
        raise NumericError(f"PSGD diverged at iteration {t + 1}: {exc}", t + 1) from exc
    state.iteration = t + 1
    state.last_class = cls
    return state


# -- experiments --------------------------------------------------------------


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    bias: BiasSchedule = LEARNING_BIAS
    iters: int = 30000
    eval_every: int = 1
    sampler_seed: int = 2
    init_seed: int = 1
    stop_when_learned: bool = True

    def __post_init__(self) -> None:
        if self.iters < 0:
            raise ConfigError("iters must be non-negative")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be at least 1")


def run_selective_learning(
    cfg: ExperimentConfig,
    data: Dataset75,
    groups: GroupAssignment,
    storage: Network | None = None,
) -> MetricsLog:
    """Biased non-batch SGD on real images, storage net only, from scratch."""
    if storage is None:
        storage = new_pair(cfg.init_seed).storage
    metrics = MetricsLog()
    metrics.append(0, evaluate_groups(storage, data, groups))
    for t in range(cfg.iters):
        cls = sample_class(cfg.bias, groups, stream_rng(cfg.sampler_seed, _SAMPLER_STREAM, t))
        try:
            train_step_storage(
                storage, data.images[cls], cls, cfg.train, stream_rng(cfg.train.dither_seed, STORAGE_STREAM, t)
            )
        except NumericError as exc:
            raise DivergenceError(f"learning run diverged at iteration {t + 1}: {exc}", t + 1, metrics) from exc
        if (t + 1) % cfg.eval_every == 0:
            errs = evaluate_groups(storage, data, groups)
            metrics.append(t + 1, errs)
            if cfg.stop_when_learned and not any(errs):
                log.info("all groups learned at iteration %d", t + 1)
                break
    return metrics


def run_selective_forgetting(
    cfg: ExperimentConfig,
    plm: PlmPair,
    data: Dataset75,
    groups: GroupAssignment,
) -> MetricsLog:
    """PSGD from a trained pair; ``data`` is read for evaluation only."""
    state = PsgdState(plm, groups, cfg.bias, cfg.sampler_seed)
    metrics = MetricsLog()
    metrics.append(0, evaluate_groups(plm.storage, data, groups))
    for _ in range(cfg.iters):
        try:
            psgd_step(state, cfg.train)
        except NumericError as exc:
            raise DivergenceError(str(exc), exc.iteration or state.iteration, metrics) from exc
        if state.iteration % cfg.eval_every == 0:
            metrics.append(state.iteration, evaluate_groups(plm.storage, data, groups))
    return metrics
