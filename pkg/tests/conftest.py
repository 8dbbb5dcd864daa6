import os
from pathlib import Path

import numpy as np
import pytest

from plm.data import Dataset75, split_groups
from plm.nncore import (
    CROSS_ENTROPY,
    IDENTITY,
    MEAN_SQUARED_ERROR,
    SIGMOID,
    SOFTMAX,
    init_network,
)

DATA_DIR = Path(__file__).parent / "data"


def mnist_path() -> Path:
    """Real MNIST when MNIST_DIR is set, else the bundled 100-digit IDX file."""
    env = os.environ.get("MNIST_DIR")
    return Path(env) if env else DATA_DIR


@pytest.fixture(scope="session")
def mnist_dir() -> Path:
    return mnist_path()


@pytest.fixture(scope="session")
def dataset(mnist_dir) -> Dataset75:
    return Dataset75.from_idx(mnist_dir)


@pytest.fixture(scope="session")
def groups():
    return split_groups(0)


def small_net(kind: str, dims=(6, 5, 4), seed: int = 0):
    hidden = [SIGMOID] * (len(dims) - 2)
    if kind == CROSS_ENTROPY:
        return init_network(list(dims), hidden + [SOFTMAX], CROSS_ENTROPY, seed)
    out = IDENTITY if kind == "mse_identity" else SIGMOID
    return init_network(list(dims), hidden + [out], MEAN_SQUARED_ERROR, seed)


def randomize_biases(net, rng) -> None:
    for layer in net.layers:
        if layer.bias_trainable:
            layer.biases[:] = rng.normal(scale=0.5, size=layer.fan_out)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CI_REPLICAS = 10
PRETRAIN_REPLICAS = 100 if os.environ.get("PLM_FULL_REPLICAS") == "1" else CI_REPLICAS

# acceptance outcomes, echoed after the run
RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])


@pytest.fixture(scope="session")
def pretrained(dataset, tmp_path_factory):
    """Pair after the full 100-sweep pretraining (10 replicas unless PLM_FULL_REPLICAS=1).

    Returns ``(pair, checkpoint_path)``; tests must copy the pair before
    training it further.
    """
    from plm.engine import TrainConfig, new_pair, pretrain, save_checkpoint
    from plm.regularize import ReplicaConfig

    pair = new_pair(1)
    pretrain(pair, dataset, 100, TrainConfig(replicas=ReplicaConfig(PRETRAIN_REPLICAS)), order_seed=2)
    path = tmp_path_factory.mktemp("ckpt") / "pretrained.ckpt"
    save_checkpoint(pair, path)
    return pair, path
