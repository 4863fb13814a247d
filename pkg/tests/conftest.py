"""Shared fixtures: tiny datasets and configurations that train in seconds."""
from pathlib import Path

import numpy as np
import pytest

from mumkit.data.dataset import generate_dataset, save_dataset
from mumkit.data.types import DataConfig, DatasetSplit
from mumkit.training.config import TrainConfig
from mumkit.utils.config import RunConfig

TINY_DATA = DataConfig(n_labeled=8, n_unlabeled=16, n_val=8, seed=0)
TINY_TRAIN = TrainConfig(epochs=3, lr_decay_epochs=(1, 2), batch_groups=1, labeled_batch=4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def tiny_split() -> DatasetSplit:
    return generate_dataset(TINY_DATA)


@pytest.fixture(scope="session")
def tiny_dataset_path(tmp_path_factory: pytest.TempPathFactory, tiny_split: DatasetSplit) -> Path:
    path = tmp_path_factory.mktemp("data") / "tiny.spd"
    save_dataset(tiny_split, path)
    return path


@pytest.fixture
def tiny_run_cfg() -> RunConfig:
    return RunConfig(data=TINY_DATA, train=TINY_TRAIN)
