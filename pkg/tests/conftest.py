"""
共用測試設定：hypothesis profile 與 tiny 模型 / 合成資料 fixtures
"""

import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from src.config import ExperimentConfig, parse_config
from src.data.manifest import Manifest
from src.data.synthetic import synth_generate
from src.models.architecture import BackboneConfig
from src.models.classifier import AdhdClassifier, build_classifier
from src.tensor.core import DType
from src.tensor.random import RandomSource

settings.register_profile("default", max_examples=50, deadline=None)
settings.register_profile(
    "ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("dev", max_examples=10, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

TINY_EXTENTS = (8, 8, 8)


def tiny_config_dict(**train: object) -> dict:
    """小型實驗設定 (tiny preset、8³ 網格、短訓練)"""
    return {
        "model": {"preset": "tiny", "input_extents": list(TINY_EXTENTS)},
        "lora": {"rank": 4},
        "train": {"epochs": 3, "batch_size": 4, "folds": 2, "lr_lora": 1e-3, "lr_head": 1e-3, **train},
    }


@pytest.fixture
def tiny_backbone_config() -> BackboneConfig:
    return BackboneConfig.from_preset("tiny")


@pytest.fixture
def tiny_experiment() -> ExperimentConfig:
    return parse_config(tiny_config_dict())


@pytest.fixture
def tiny_model(tiny_backbone_config: BackboneConfig) -> AdhdClassifier:
    return build_classifier(tiny_backbone_config, 4, RandomSource(7))


@pytest.fixture
def tiny_model64(tiny_backbone_config: BackboneConfig) -> AdhdClassifier:
    """float64 版本，用於有限差分比對"""
    return build_classifier(tiny_backbone_config, 4, RandomSource(11), dropout=0.0, dtype=DType.FLOAT64)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """每類 6 位受試者、8³ 的合成資料"""
    out = tmp_path_factory.mktemp("synth")
    synth_generate(6, TINY_EXTENTS, seed=3, separation=2.0, out_dir=out)
    return out


@pytest.fixture
def synth_manifest(synth_dir: Path) -> Manifest:
    return Manifest.load(synth_dir / "manifest.csv")


def random_input(rng: np.random.Generator, n: int = 2, extents: tuple = TINY_EXTENTS,
                 dtype: type = np.float32) -> np.ndarray:
    return rng.standard_normal((n, 2) + tuple(extents)).astype(dtype)
