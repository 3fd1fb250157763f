#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ADHD 二元分類器
凍結 backbone + 注入的 LoRA adapter + 可訓練 MLP head (feature → 128 → GELU → dropout → 1)
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..errors import CheckpointLoadError, ShapeError
from ..layers.base import LayerGrads
from ..layers.functional import (
    Dropout, DropoutMode, Linear, dropout_backward, dropout_forward,
    gelu, gelu_backward, linear_backward, linear_forward,
)
from ..lora.adapter import AdaptedConv3d, adapt, merge
from ..tensor.core import DType
from ..tensor.random import RandomSource
from .architecture import BackboneConfig, is_excluded
from .backbone import NORM_FIELDS, Backbone3d, BackboneCache, build_backbone

logger = logging.getLogger(__name__)

HEAD_HIDDEN_UNITS = 128
HEAD_DROPOUT = 0.5


# --- MLP Head ---

@dataclass
class HeadCache:
    features: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    mask: Optional[np.ndarray]


@dataclass
class MlpHead:
    """兩層 MLP：linear(feature_dim → hidden) + GELU + dropout，linear(hidden → 1)"""
    fc1: Linear
    fc2: Linear
    dropout: Dropout

    def parameters(self) -> Dict[str, np.ndarray]:
        return {
            "head.fc1.bias": self.fc1.bias,
            "head.fc1.weight": self.fc1.weight,
            "head.fc2.bias": self.fc2.bias,
            "head.fc2.weight": self.fc2.weight,
        }

    def forward(
        self, features: np.ndarray, train: bool = False, rng: Optional[RandomSource] = None
    ) -> Tuple[np.ndarray, HeadCache]:
        hidden_pre = linear_forward(self.fc1, features)
        mode = DropoutMode.TRAIN if train else DropoutMode.EVAL
        hidden, mask = dropout_forward(replace(self.dropout, mode=mode), gelu(hidden_pre), rng)
        logits = linear_forward(self.fc2, hidden)[:, 0]
        return logits, HeadCache(features, hidden_pre, hidden, mask)

    def backward(self, cache: HeadCache, grad_logits: np.ndarray) -> LayerGrads:
        out = linear_backward(self.fc2, cache.hidden, grad_logits[:, None])
        g = gelu_backward(cache.hidden_pre, dropout_backward(cache.mask, out.input_grad))
        hidden = linear_backward(self.fc1, cache.features, g)
        params = {f"head.fc2.{k}": v for k, v in out.params.items()}
        params.update({f"head.fc1.{k}": v for k, v in hidden.params.items()})
        return LayerGrads(input_grad=hidden.input_grad, params=params)


def _he_linear(in_features: int, out_features: int, rng: RandomSource, dtype: DType) -> Linear:
    """He (fan-in) 高斯權重、零 bias"""
    weight = rng.gaussian((out_features, in_features), std=float(np.sqrt(2.0 / in_features)))
    return Linear(weight=weight.astype(dtype.numpy), bias=np.zeros(out_features, dtype=dtype.numpy))


def build_head(
    feature_dim: int,
    rng: RandomSource,
    hidden_units: int = HEAD_HIDDEN_UNITS,
    dropout: float = HEAD_DROPOUT,
    dtype: DType = DType.FLOAT32,
) -> MlpHead:
    return MlpHead(
        fc1=_he_linear(feature_dim, hidden_units, rng, dtype),
        fc2=_he_linear(hidden_units, 1, rng, dtype),
        dropout=Dropout(rate=dropout),
    )


# --- 分類器 ---

@dataclass
class ForwardCache:
    backbone: BackboneCache
    head: HeadCache


class AdhdClassifier:
    """
    端對端模型；可訓練參數登錄表只包含 LoRA A/B 與 head 的 weight/bias

    登錄表中的陣列就是模型實際使用的陣列，最佳化器原地更新即生效
    """

    def __init__(self, config: BackboneConfig, backbone: Backbone3d, head: MlpHead):
        self.config = config
        self.backbone = backbone
        self.head = head

    @property
    def has_adapters(self) -> bool:
        return any(True for _ in self.backbone.named_adapters())

    def trainable_parameters(self) -> Dict[str, np.ndarray]:
        params: Dict[str, np.ndarray] = {}
        for name, conv in self.backbone.named_adapters():
            params[f"{name}.lora_a"] = conv.adapter.a
            params[f"{name}.lora_b"] = conv.adapter.b
        params.update(self.head.parameters())
        return dict(sorted(params.items()))

    def frozen_tensors(self) -> Dict[str, np.ndarray]:
        return self.backbone.frozen_tensors()

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 5 or x.shape[1] != self.config.in_channels:
            raise ShapeError(
                f"輸入必須是 [n, {self.config.in_channels}, D, H, W]，實際為 {x.shape}"
            )

    def forward(
        self, x: np.ndarray, train: bool = False, rng: Optional[RandomSource] = None
    ) -> Tuple[np.ndarray, ForwardCache]:
        """[n, c, D, H, W] → [n] logits"""
        self._check_input(x)
        features, backbone_cache = self.backbone.forward(x)
        logits, head_cache = self.head.forward(features, train=train, rng=rng)
        return logits, ForwardCache(backbone_cache, head_cache)

    def backward(self, cache: ForwardCache, grad_logits: np.ndarray) -> Dict[str, np.ndarray]:
        """回傳涵蓋整個登錄表的梯度 (只反傳經過 head 與 adapter)"""
        head = self.head.backward(cache.head, grad_logits)
        grads = dict(head.params)
        if self.has_adapters:
            grads.update(self.backbone.backward(cache.backbone, head.input_grad))
        return dict(sorted(grads.items()))

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, train=False)[0]

    def predict_score(self, x: np.ndarray) -> np.ndarray:
        """ADHD 類別分數 logistic(logit) ∈ [0, 1]，dropout 為 eval 模式"""
        return expit(self.logits(x).astype(np.float64))

    def load_tensors(self, tensors: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """
        將具名張量原地寫入模型 (可訓練參數或凍結張量)
        strict 時登錄表中每個名稱都必須出現
        """
        targets = {**self.frozen_tensors(), **self.trainable_parameters()}
        for name in sorted(tensors):
            if name not in targets:
                raise CheckpointLoadError(name, "模型中沒有此張量")
            value = tensors[name]
            if value.shape != targets[name].shape:
                raise CheckpointLoadError(
                    name, f"形狀 {value.shape} 與模型 {targets[name].shape} 不符"
                )
            np.copyto(targets[name], value, casting="same_kind")
        if strict:
            missing = sorted(set(self.trainable_parameters()) - set(tensors))
            if missing:
                raise CheckpointLoadError(missing[0], "checkpoint 缺少此可訓練參數")


def predict_score(m: AdhdClassifier, x: np.ndarray) -> np.ndarray:
    return m.predict_score(x)


def _load_backbone_weights(backbone: Backbone3d, weights: Mapping[str, np.ndarray]) -> None:
    """依名稱排序載入凍結張量；第一個缺少或形狀不符的張量會被指名"""
    targets = backbone.frozen_tensors()
    for name, target in targets.items():
        if name not in weights:
            raise CheckpointLoadError(name, "checkpoint 缺少此 backbone 張量")
        if weights[name].shape != target.shape:
            raise CheckpointLoadError(
                name, f"形狀 {weights[name].shape} 與架構 {target.shape} 不符"
            )
        np.copyto(target, weights[name], casting="same_kind")


def build_classifier(
    config: BackboneConfig,
    r: Optional[int],
    rng: RandomSource,
    weights: Optional[Mapping[str, np.ndarray]] = None,
    scale: float = 1.0,
    exclude: Sequence[str] = (),
    hidden_units: int = HEAD_HIDDEN_UNITS,
    dropout: float = HEAD_DROPOUT,
    dtype: DType = DType.FLOAT32,
) -> AdhdClassifier:
    """
    建立分類器

    亂數抽取順序固定：backbone 權重 (未給 weights 時) → 各 adapter (卷積前向順序) → head。
    r 為 None 時不注入 adapter (合併後的模型或純 head 對照)。
    """
    if weights is None:
        backbone = build_backbone(config, rng, dtype)
    else:
        backbone = build_backbone(config, RandomSource(0), dtype)
        _load_backbone_weights(backbone, weights)
        logger.info(f"📊 backbone 權重由 checkpoint 載入 ({len(backbone.frozen_tensors())} 個張量)")

    if r is not None:
        adapted = 0
        for name, layer in list(backbone.named_convs()):
            if is_excluded(name, exclude):
                continue
            backbone.replace_conv(name, adapt(layer, r, rng, scale=scale))  # type: ignore[arg-type]
            adapted += 1
        logger.info(f"🔧 注入 {adapted} 個 LoRA adapter (r={r}, scale={scale})")

    head = build_head(config.feature_dim, rng, hidden_units, dropout, dtype)
    return AdhdClassifier(config, backbone, head)


def strip_adapters(model: AdhdClassifier) -> AdhdClassifier:
    """同一組凍結權重與 head、但不含 adapter 的模型 (共用陣列)"""
    stripped = copy.copy(model.backbone)
    stripped.stem = replace(model.backbone.stem)
    stripped.blocks = [replace(block) for block in model.backbone.blocks]
    for name, layer in list(stripped.named_convs()):
        if isinstance(layer, AdaptedConv3d):
            stripped.replace_conv(name, layer.frozen)
    return AdhdClassifier(model.config, stripped, model.head)


def merge_adapters(model: AdhdClassifier) -> AdhdClassifier:
    """將所有 adapter 合併進卷積權重，回傳不含 adapter 的新模型"""
    merged = copy.deepcopy(model)
    for name, layer in list(merged.backbone.named_convs()):
        if isinstance(layer, AdaptedConv3d):
            merged.backbone.replace_conv(name, merge(layer))
    return merged


__all__ = [
    "AdhdClassifier", "MlpHead", "ForwardCache", "HEAD_HIDDEN_UNITS", "HEAD_DROPOUT",
    "NORM_FIELDS", "build_classifier", "build_head", "predict_score",
    "strip_adapters", "merge_adapters",
]
