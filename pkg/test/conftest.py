"""Shared fixtures: tiny synthetic datasets, small networks and seeded generators."""

from pathlib import Path

import numpy as np
import pytest

from multipod.data_handling.manifest import load_manifest
from multipod.data_handling.packets.subject_record import Manifest
from multipod.data_handling.synthetic import SyntheticConfig, generate_synthetic
from multipod.model.multipod_net import MultiPodConfig, MultiPodNet, build_model
from multipod.training.trainer import TrainConfig

PROBE_WIDTHS = (2, 4, 8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_config() -> MultiPodConfig:
    """A TriPod network narrow enough to train in a second."""
    return MultiPodConfig(widths=PROBE_WIDTHS, blocks_per_stage=1, seed=3)


@pytest.fixture
def small_model(small_config: MultiPodConfig) -> MultiPodNet:
    return build_model(small_config)


@pytest.fixture
def small_train_config() -> TrainConfig:
    return TrainConfig(batch_size=4, epochs=3, seed=5)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Two images per stage, already cropped to the region of interest."""
    out = tmp_path_factory.mktemp("synthetic")
    generate_synthetic(SyntheticConfig(per_stage_count=2, seed=11), out)
    return out


@pytest.fixture(scope="session")
def synthetic_manifest(synthetic_dir: Path) -> Manifest:
    return load_manifest(synthetic_dir / "manifest.csv")


@pytest.fixture(scope="session")
def synthetic_test_manifest(tmp_path_factory: pytest.TempPathFactory) -> Manifest:
    """One held-out image per stage, drawn with another seed."""
    out = tmp_path_factory.mktemp("synthetic_test")
    manifest, _ = generate_synthetic(SyntheticConfig(per_stage_count=1, seed=12), out)
    return manifest
