#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
凍結的 3D ResNet backbone (bottleneck 結構)

每個卷積槽位可以是一般 Conv3d 或 AdaptedConv3d；
反向傳播只回傳 adapter 參數的梯度，凍結權重與正規化參數永遠不產生梯度
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..layers.conv3d import Conv3d
from ..layers.functional import (
    FrozenNorm, MaxPool3d, frozen_norm_backward, frozen_norm_forward,
    global_avg_pool, global_avg_pool_backward, max_pool3d, max_pool3d_backward,
    relu, relu_backward,
)
from ..lora.adapter import (
    AdaptedConv3d, ConvLayer, conv_layer_backward, conv_layer_forward, frozen_conv,
)
from ..tensor.core import DType
from ..tensor.random import RandomSource
from .architecture import (
    STEM_POOL_KERNEL, STEM_POOL_PADDING, STEM_POOL_STRIDE,
    BackboneConfig, ConvSpec, backbone_layout,
)

logger = logging.getLogger(__name__)

NORM_FIELDS = ("scale", "shift", "running_mean", "running_var")


@dataclass
class Stem:
    conv: ConvLayer
    norm: FrozenNorm
    pool: Optional[MaxPool3d] = None
    name: str = "backbone.stem"


@dataclass
class BottleneckBlock:
    """1³ → 3³ → 1³ 卷積加上 shortcut (必要時為 1³ 投影卷積)"""
    name: str
    conv1: ConvLayer
    norm1: FrozenNorm
    conv2: ConvLayer
    norm2: FrozenNorm
    conv3: ConvLayer
    norm3: FrozenNorm
    downsample: Optional[ConvLayer] = None
    downsample_norm: Optional[FrozenNorm] = None


@dataclass
class BlockCache:
    x: np.ndarray
    n1: np.ndarray
    a1: np.ndarray
    n2: np.ndarray
    a2: np.ndarray
    pre_activation: np.ndarray


@dataclass
class BackboneCache:
    stem_input: np.ndarray
    stem_norm: np.ndarray
    stem_activation_shape: Tuple[int, ...]
    pool_argmax: Optional[np.ndarray]
    blocks: List[BlockCache] = field(default_factory=list)
    feature_map_shape: Tuple[int, ...] = ()


def _grads_with_prefix(prefix: str, params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    return {f"{prefix}.{key}": value for key, value in params.items()}


class Backbone3d:
    """凍結的 3D ResNet 特徵抽取器"""

    def __init__(self, config: BackboneConfig, stem: Stem, blocks: List[BottleneckBlock]):
        self.config = config
        self.stem = stem
        self.blocks = blocks
        # True 時 adapter 以兩條並聯路徑計算 (凍結卷積 + ΔW 卷積)
        self.parallel_adapters = False

    # --- 槽位走訪 ---

    def _conv_slots(self) -> Iterator[Tuple[str, Any, str]]:
        yield f"{self.stem.name}.conv", self.stem, "conv"
        for block in self.blocks:
            for attr in ("conv1", "conv2", "conv3"):
                yield f"{block.name}.{attr}", block, attr
            if block.downsample is not None:
                yield f"{block.name}.downsample.conv", block, "downsample"

    def _norm_slots(self) -> Iterator[Tuple[str, FrozenNorm]]:
        yield f"{self.stem.name}.norm", self.stem.norm
        for block in self.blocks:
            for index in (1, 2, 3):
                yield f"{block.name}.norm{index}", getattr(block, f"norm{index}")
            if block.downsample_norm is not None:
                yield f"{block.name}.downsample.norm", block.downsample_norm

    def named_convs(self) -> Iterator[Tuple[str, ConvLayer]]:
        for name, owner, attr in self._conv_slots():
            yield name, getattr(owner, attr)

    def named_adapters(self) -> Iterator[Tuple[str, AdaptedConv3d]]:
        for name, layer in self.named_convs():
            if isinstance(layer, AdaptedConv3d):
                yield name, layer

    def replace_conv(self, name: str, layer: ConvLayer) -> None:
        for slot_name, owner, attr in self._conv_slots():
            if slot_name == name:
                setattr(owner, attr, layer)
                return
        raise KeyError(f"找不到卷積: {name}")

    def frozen_tensors(self) -> Dict[str, np.ndarray]:
        """所有凍結張量 (卷積權重 / bias 與正規化統計量)，依名稱排序"""
        tensors: Dict[str, np.ndarray] = {}
        for name, layer in self.named_convs():
            conv = frozen_conv(layer)
            tensors[f"{name}.weight"] = conv.weight
            if conv.bias is not None:
                tensors[f"{name}.bias"] = conv.bias
        for name, norm in self._norm_slots():
            for attr in NORM_FIELDS:
                tensors[f"{name}.{attr}"] = getattr(norm, attr)
        return dict(sorted(tensors.items()))

    # --- 前向 / 反向 ---

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, BackboneCache]:
        h = self._conv(self.stem.conv, x)
        stem_norm = frozen_norm_forward(self.stem.norm, h)
        h = relu(stem_norm)
        stem_activation_shape = h.shape
        pool_argmax = None
        if self.stem.pool is not None:
            h, pool_argmax = max_pool3d(self.stem.pool, h)
        cache = BackboneCache(x, stem_norm, stem_activation_shape, pool_argmax)

        for block in self.blocks:
            h, block_cache = self._block_forward(block, h)
            cache.blocks.append(block_cache)

        cache.feature_map_shape = h.shape
        return global_avg_pool(h), cache

    def _conv(self, layer: ConvLayer, x: np.ndarray) -> np.ndarray:
        return conv_layer_forward(layer, x, parallel=self.parallel_adapters)

    def _block_forward(self, block: BottleneckBlock, x: np.ndarray) -> Tuple[np.ndarray, BlockCache]:
        n1 = frozen_norm_forward(block.norm1, self._conv(block.conv1, x))
        a1 = relu(n1)
        n2 = frozen_norm_forward(block.norm2, self._conv(block.conv2, a1))
        a2 = relu(n2)
        n3 = frozen_norm_forward(block.norm3, self._conv(block.conv3, a2))
        shortcut = x
        if block.downsample is not None and block.downsample_norm is not None:
            shortcut = frozen_norm_forward(block.downsample_norm, self._conv(block.downsample, x))
        pre_activation = n3 + shortcut
        return relu(pre_activation), BlockCache(x, n1, a1, n2, a2, pre_activation)

    def backward(self, cache: BackboneCache, grad_features: np.ndarray) -> Dict[str, np.ndarray]:
        """回傳各 adapter 參數梯度，鍵為 '<卷積名稱>.lora_a' / '.lora_b'"""
        grads: Dict[str, np.ndarray] = {}
        g = global_avg_pool_backward(cache.feature_map_shape, grad_features)
        for block, block_cache in zip(reversed(self.blocks), reversed(cache.blocks)):
            g = self._block_backward(block, block_cache, g, grads)

        if self.stem.pool is not None and cache.pool_argmax is not None:
            g = max_pool3d_backward(self.stem.pool, cache.stem_activation_shape, cache.pool_argmax, g)
        g = frozen_norm_backward(self.stem.norm, relu_backward(cache.stem_norm, g))
        if isinstance(self.stem.conv, AdaptedConv3d):
            result = conv_layer_backward(self.stem.conv, cache.stem_input, g)
            grads.update(_grads_with_prefix(f"{self.stem.name}.conv", result.params))
        return grads

    @staticmethod
    def _block_backward(
        block: BottleneckBlock, cache: BlockCache, grad_out: np.ndarray, grads: Dict[str, np.ndarray]
    ) -> np.ndarray:
        g = relu_backward(cache.pre_activation, grad_out)

        result = conv_layer_backward(block.conv3, cache.a2, frozen_norm_backward(block.norm3, g))
        grads.update(_grads_with_prefix(f"{block.name}.conv3", result.params))
        g_mid = frozen_norm_backward(block.norm2, relu_backward(cache.n2, result.input_grad))

        result = conv_layer_backward(block.conv2, cache.a1, g_mid)
        grads.update(_grads_with_prefix(f"{block.name}.conv2", result.params))
        g_mid = frozen_norm_backward(block.norm1, relu_backward(cache.n1, result.input_grad))

        result = conv_layer_backward(block.conv1, cache.x, g_mid)
        grads.update(_grads_with_prefix(f"{block.name}.conv1", result.params))
        grad_x = result.input_grad

        if block.downsample is not None and block.downsample_norm is not None:
            result = conv_layer_backward(
                block.downsample, cache.x, frozen_norm_backward(block.downsample_norm, g)
            )
            grads.update(_grads_with_prefix(f"{block.name}.downsample.conv", result.params))
            return grad_x + result.input_grad
        return grad_x + g


# --- 建構 ---

def _random_conv(spec: ConvSpec, rng: RandomSource, dtype: DType, bias: bool) -> Conv3d:
    """He (fan-in) 高斯初始化的凍結卷積"""
    fan_in = spec.in_channels * spec.kernel ** 3
    shape = (spec.out_channels, spec.in_channels) + (spec.kernel,) * 3
    weight = rng.gaussian(shape, std=float(np.sqrt(2.0 / fan_in))).astype(dtype.numpy)
    return Conv3d(
        weight=weight,
        bias=np.zeros(spec.out_channels, dtype=dtype.numpy) if bias else None,
        stride=spec.stride,
        padding=spec.padding,
    )


def build_backbone(config: BackboneConfig, rng: RandomSource, dtype: DType = DType.FLOAT32) -> Backbone3d:
    """
    依架構從 rng 決定性地抽取凍結權重 (依卷積前向順序)
    正規化層初始化為恆等映射 (scale 1、shift 0、mean 0、var 1)
    """
    layout = backbone_layout(config)
    logger.info(f"🔧 建立 backbone: {config.preset} ({len(layout.blocks)} blocks)")

    def norm(channels: int) -> FrozenNorm:
        return FrozenNorm.identity(channels, dtype=dtype.numpy, eps=config.norm_eps)

    pool = None
    if config.stem.max_pool:
        pool = MaxPool3d(
            kernel=(STEM_POOL_KERNEL,) * 3, stride=(STEM_POOL_STRIDE,) * 3, padding=(STEM_POOL_PADDING,) * 3
        )
    stem = Stem(
        conv=_random_conv(layout.stem, rng, dtype, config.conv_bias),
        norm=norm(layout.stem.out_channels),
        pool=pool,
    )

    blocks = []
    for block in layout.blocks:
        convs = [_random_conv(spec, rng, dtype, config.conv_bias) for spec in block.convs()]
        downsample = convs[3] if block.downsample is not None else None
        blocks.append(BottleneckBlock(
            name=block.name,
            conv1=convs[0],
            norm1=norm(block.conv1.out_channels),
            conv2=convs[1],
            norm2=norm(block.conv2.out_channels),
            conv3=convs[2],
            norm3=norm(block.conv3.out_channels),
            downsample=downsample,
            downsample_norm=norm(block.conv3.out_channels) if downsample is not None else None,
        ))
    return Backbone3d(config, stem, blocks)
