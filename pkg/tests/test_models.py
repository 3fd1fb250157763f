#!/usr/bin/env python3
"""
測試 backbone 架構、分類器組裝、可訓練參數登錄表與端到端梯度
"""

import numpy as np
import pytest

from src.errors import CheckpointLoadError, ShapeError
from src.models import (
    BackboneConfig, BackbonePreset, backbone_layout, build_classifier,
    iter_conv_specs, merge_adapters, strip_adapters,
)
from src.tensor.core import DType
from src.tensor.random import RandomSource
from tests.conftest import random_input
from tests.gradcheck import assert_grad_close, numeric_grad, sample_indices

TINY_CONVS = [
    "backbone.stem.conv",
    "backbone.layer1.0.conv1", "backbone.layer1.0.conv2", "backbone.layer1.0.conv3",
    "backbone.layer1.0.downsample.conv",
    "backbone.layer2.0.conv1", "backbone.layer2.0.conv2", "backbone.layer2.0.conv3",
    "backbone.layer2.0.downsample.conv",
]


# --- 架構 ---

def test_tiny_layout(tiny_backbone_config):
    """tiny: 3³ stride-2 stem (8)，兩個 bottleneck stage，特徵 32 維"""
    assert tiny_backbone_config.feature_dim == 32
    assert [spec.name for spec in iter_conv_specs(tiny_backbone_config)] == TINY_CONVS
    layout = backbone_layout(tiny_backbone_config, (16, 16, 16))
    assert layout.stem.out_extents == (8, 8, 8)
    assert layout.feature_extents == (4, 4, 4)


def test_resnet50_3d_layout():
    """resnet50-3d: [3, 4, 6, 3] bottleneck，擴張 4，特徵 2048 維"""
    config = BackboneConfig.from_preset(BackbonePreset.RESNET50_3D)
    specs = list(iter_conv_specs(config))
    assert len(specs) == 1 + 16 * 3 + 4
    assert config.feature_dim == 2048
    assert specs[0].kernel == 7 and specs[0].stride == 2 and specs[0].out_channels == 64
    downsamples = [s.name for s in specs if s.name.endswith("downsample.conv")]
    assert downsamples == [f"backbone.layer{i}.0.downsample.conv" for i in range(1, 5)]

    layout = backbone_layout(config, (128, 128, 128))
    assert layout.stem.out_extents == (64, 64, 64)
    assert layout.blocks[0].conv1.in_extents == (32, 32, 32)
    assert layout.feature_extents == (4, 4, 4)


# --- 組裝與登錄表 ---

def test_trainable_registry_contains_only_adapters_and_head(tiny_model):
    params = tiny_model.trainable_parameters()
    assert len(params) == 2 * len(TINY_CONVS) + 4
    for name in params:
        assert ".lora_" in name or name.startswith("head.")
    assert not set(params) & set(tiny_model.frozen_tensors())
    assert list(params) == sorted(params)


def test_build_is_deterministic(tiny_backbone_config):
    first = build_classifier(tiny_backbone_config, 4, RandomSource(3))
    second = build_classifier(tiny_backbone_config, 4, RandomSource(3))
    for name, value in first.trainable_parameters().items():
        np.testing.assert_array_equal(value, second.trainable_parameters()[name])
    for name, value in first.frozen_tensors().items():
        np.testing.assert_array_equal(value, second.frozen_tensors()[name])


def test_exclude_patterns_and_adapter_free_model(tiny_backbone_config):
    excluded = build_classifier(tiny_backbone_config, 4, RandomSource(0), exclude=["*.downsample.conv"])
    names = {name for name, _ in excluded.backbone.named_adapters()}
    assert names == {n for n in TINY_CONVS if not n.endswith("downsample.conv")}

    plain = build_classifier(tiny_backbone_config, None, RandomSource(0))
    assert not plain.has_adapters
    assert set(plain.trainable_parameters()) == {
        "head.fc1.bias", "head.fc1.weight", "head.fc2.bias", "head.fc2.weight",
    }


def test_forward_shapes_and_input_contract(tiny_model):
    rng = np.random.default_rng(0)
    logits, _ = tiny_model.forward(random_input(rng, n=3))
    assert logits.shape == (3,)
    scores = tiny_model.predict_score(random_input(rng, n=3))
    assert scores.dtype == np.float64
    assert np.all((scores >= 0.0) & (scores <= 1.0))

    with pytest.raises(ShapeError):
        tiny_model.forward(rng.standard_normal((1, 3, 8, 8, 8)).astype(np.float32))
    with pytest.raises(ShapeError):
        tiny_model.forward(rng.standard_normal((2, 8, 8, 8)).astype(np.float32))


# --- 初始化不改變輸出 ---

@pytest.mark.parametrize("seed", range(5))
def test_init_noop_tiny(tiny_backbone_config, seed):
    """注入 adapter 後、訓練前的 logits 與凍結模型相同"""
    model = build_classifier(tiny_backbone_config, 4, RandomSource(seed))
    frozen = strip_adapters(model)
    assert not frozen.has_adapters and model.has_adapters
    x = random_input(np.random.default_rng(seed), n=2)
    np.testing.assert_allclose(model.logits(x), frozen.logits(x), rtol=0, atol=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_init_noop_resnet50_3d(seed):
    config = BackboneConfig.from_preset("resnet50-3d")
    model = build_classifier(config, 4, RandomSource(seed))
    frozen = strip_adapters(model)
    x = random_input(np.random.default_rng(seed), n=1, extents=(16, 16, 16))
    np.testing.assert_allclose(model.logits(x), frozen.logits(x), rtol=0, atol=1e-6)


# --- 反向傳播 ---

def test_backward_covers_registry_and_matches_finite_differences(tiny_model64):
    """梯度涵蓋整個登錄表，且與中心差分一致"""
    rng = np.random.default_rng(5)
    for _, conv in tiny_model64.backbone.named_adapters():
        conv.adapter.b[...] = 0.1 * rng.standard_normal(conv.adapter.b.shape)
    x = random_input(rng, n=2, dtype=np.float64)
    upstream = rng.standard_normal(2)

    def loss():
        return float(np.sum(tiny_model64.logits(x) * upstream))

    _, cache = tiny_model64.forward(x)
    grads = tiny_model64.backward(cache, upstream)
    params = tiny_model64.trainable_parameters()
    assert set(grads) == set(params)
    for name in ("backbone.stem.conv.lora_a", "backbone.layer1.0.conv2.lora_b",
                 "backbone.layer2.0.downsample.conv.lora_a", "head.fc1.weight", "head.fc2.bias"):
        indices = sample_indices(rng, params[name].shape, count=6)
        assert_grad_close(
            np.array([grads[name][i] for i in indices]), numeric_grad(loss, params[name], indices), rtol=1e-5
        )


def test_backward_never_touches_frozen_tensors(tiny_model):
    before = {k: v.copy() for k, v in tiny_model.frozen_tensors().items()}
    x = random_input(np.random.default_rng(1), n=2)
    _, cache = tiny_model.forward(x, train=True, rng=RandomSource(0))
    tiny_model.backward(cache, np.ones(2, dtype=np.float32))
    for name, value in tiny_model.frozen_tensors().items():
        np.testing.assert_array_equal(value, before[name])


# --- 合併與載入 ---

def test_merge_adapters_matches_adapted_model(tiny_model64):
    rng = np.random.default_rng(2)
    for _, conv in tiny_model64.backbone.named_adapters():
        conv.adapter.b[...] = 0.05 * rng.standard_normal(conv.adapter.b.shape)
    merged = merge_adapters(tiny_model64)
    assert not merged.has_adapters and tiny_model64.has_adapters

    x = random_input(rng, n=3, dtype=np.float64)
    tiny_model64.backbone.parallel_adapters = True
    np.testing.assert_allclose(merged.logits(x), tiny_model64.logits(x), rtol=1e-10, atol=1e-10)


def test_backbone_weights_are_loaded_by_name(tiny_backbone_config):
    source = build_classifier(tiny_backbone_config, None, RandomSource(99))
    model = build_classifier(tiny_backbone_config, 4, RandomSource(1), weights=source.frozen_tensors())
    for name, value in source.frozen_tensors().items():
        np.testing.assert_array_equal(model.frozen_tensors()[name], value)

    partial = dict(source.frozen_tensors())
    del partial["backbone.layer1.0.conv2.weight"]
    with pytest.raises(CheckpointLoadError, match="backbone.layer1.0.conv2.weight"):
        build_classifier(tiny_backbone_config, 4, RandomSource(1), weights=partial)


def test_load_tensors_reports_offending_name(tiny_model):
    params = {k: v.copy() for k, v in tiny_model.trainable_parameters().items()}
    tiny_model.load_tensors(params)

    wrong = dict(params)
    wrong["head.fc1.weight"] = np.zeros((3, 3), dtype=np.float32)
    with pytest.raises(CheckpointLoadError) as excinfo:
        tiny_model.load_tensors(wrong)
    assert excinfo.value.name == "head.fc1.weight"

    with pytest.raises(CheckpointLoadError):
        tiny_model.load_tensors({**params, "head.fc3.weight": np.zeros(1, dtype=np.float32)})

    missing = dict(params)
    del missing["head.fc2.bias"]
    with pytest.raises(CheckpointLoadError, match="head.fc2.bias"):
        tiny_model.load_tensors(missing)


def test_float64_models(tiny_backbone_config):
    model = build_classifier(tiny_backbone_config, 2, RandomSource(0), dtype=DType.FLOAT64)
    assert all(v.dtype == np.float64 for v in model.trainable_parameters().values())
    assert all(v.dtype == np.float64 for v in model.frozen_tensors().values())
