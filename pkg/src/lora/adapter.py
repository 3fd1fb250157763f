#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
3D 卷積的低秩適配 (LoRA)

對權重 W ∈ R^{d_out × d_in·k³} (5 維 kernel 依 row-major 攤平) 加上低秩更新
    W' = W + ΔW,  ΔW = scale · B·A,  B ∈ R^{d_out×r},  A ∈ R^{r×d_in·k³}
初始化 B = 0、A ~ N(0, 0.01²)，因此初始時 ΔW = 0，適配後模型與凍結模型輸出完全相同。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from ..errors import ArgumentError, ShapeError
from ..layers.base import LayerGrads
from ..layers.conv3d import Conv3d, conv3d_backward, conv3d_forward
from ..tensor.core import DType, add, matmul, reshape, scale as scale_tensor, zeros
from ..tensor.random import RandomSource

logger = logging.getLogger(__name__)

ADAPTER_INIT_STD = 0.01


@dataclass
class LoraAdapter:
    """一個凍結卷積所附帶的可訓練 (A, B) 矩陣對"""
    a: np.ndarray  # [r, d_in·k³]
    b: np.ndarray  # [d_out, r]
    rank: int
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.a.ndim != 2 or self.b.ndim != 2:
            raise ShapeError(f"A / B 必須是矩陣: A {self.a.shape}, B {self.b.shape}")
        if self.a.shape[0] != self.rank or self.b.shape[1] != self.rank:
            raise ShapeError(f"A {self.a.shape} / B {self.b.shape} 與 rank {self.rank} 不符")
        if self.scale <= 0:
            raise ArgumentError(f"scale 必須為正: {self.scale}")

    def delta_matrix(self) -> np.ndarray:
        """scale · B·A，形狀 [d_out, d_in·k³]"""
        return scale_tensor(matmul(self.b, self.a), self.scale)

    @property
    def param_count(self) -> int:
        return int(self.a.size + self.b.size)


@dataclass
class AdaptedConv3d:
    """凍結卷積 + 並聯的 LoRA 更新"""
    frozen: Conv3d
    adapter: LoraAdapter

    def __post_init__(self) -> None:
        d_out = self.frozen.out_channels
        fan_in = int(np.prod(self.frozen.weight.shape[1:]))
        if self.adapter.b.shape[0] != d_out or self.adapter.a.shape[1] != fan_in:
            raise ShapeError(
                f"adapter A {self.adapter.a.shape} / B {self.adapter.b.shape} "
                f"與卷積 weight {self.frozen.weight.shape} 不相容"
            )

    def delta_weight(self) -> np.ndarray:
        """ΔW 還原為 5 維 kernel 形狀"""
        return reshape(self.adapter.delta_matrix(), self.frozen.weight.shape)

    def merged_weight(self) -> np.ndarray:
        return add(self.frozen.weight, self.delta_weight().astype(self.frozen.weight.dtype, copy=False))


ConvLayer = Union[Conv3d, AdaptedConv3d]


def lora_param_count(d_out: int, d_in: int, k: int, r: int) -> int:
    """r·(d_out + d_in·k³)"""
    return r * (d_out + d_in * k ** 3)


def init_adapter(
    d_out: int,
    d_in: int,
    k: int,
    r: int,
    rng: RandomSource,
    scale: float = 1.0,
    dtype: DType = DType.FLOAT32,
) -> LoraAdapter:
    if min(d_out, d_in, k, r) < 1:
        raise ArgumentError(f"維度必須為正: d_out={d_out}, d_in={d_in}, k={k}, r={r}")
    fan_in = d_in * k ** 3
    if r > min(d_out, fan_in):
        raise ArgumentError(f"rank {r} 超過矩陣維度 min({d_out}, {fan_in})")
    a = rng.gaussian((r, fan_in), mean=0.0, std=ADAPTER_INIT_STD).astype(dtype.numpy)
    b = zeros((d_out, r), dtype)
    return LoraAdapter(a=a, b=b, rank=r, scale=scale)


def adapt(conv: Conv3d, r: int, rng: RandomSource, scale: float = 1.0) -> AdaptedConv3d:
    """為凍結卷積建立 adapter (kernel 必須是立方體)"""
    k0, k1, k2 = conv.kernel_size
    if not k0 == k1 == k2:
        raise ArgumentError(f"LoRA 僅支援立方體 kernel: {conv.kernel_size}")
    adapter = init_adapter(
        conv.out_channels, conv.in_channels, k0, r, rng, scale=scale,
        dtype=DType.from_numpy(conv.weight.dtype),
    )
    logger.debug(f"🔧 adapter r={r}: A {adapter.a.shape}, B {adapter.b.shape}")
    return AdaptedConv3d(frozen=conv, adapter=adapter)


def _delta_conv(conv: AdaptedConv3d) -> Conv3d:
    return Conv3d(
        weight=conv.delta_weight().astype(conv.frozen.weight.dtype, copy=False),
        bias=None,
        stride=conv.frozen.stride,
        padding=conv.frozen.padding,
    )


def merge(conv: AdaptedConv3d) -> Conv3d:
    """回傳權重為 W + scale·reshape(BA) 的一般卷積，adapter 捨棄"""
    return replace(conv.frozen, weight=conv.merged_weight())


def adapted_forward(conv: AdaptedConv3d, x: np.ndarray, parallel: bool = False) -> np.ndarray:
    """
    以合併權重 W + ΔW 做卷積；parallel=True 時分別計算凍結路徑與 ΔW 路徑後相加

    B = 0 時合併權重與 W 逐位元相同，輸出與凍結路徑一致
    """
    if parallel:
        return conv3d_forward(conv.frozen, x) + conv3d_forward(_delta_conv(conv), x)
    return conv3d_forward(merge(conv), x)


def adapter_backward(conv: AdaptedConv3d, x: np.ndarray, grad_out: np.ndarray) -> LayerGrads:
    """
    ∂L/∂x 經由兩條路徑 (等同以合併權重反傳)；
    G = flatten(∂L/∂ΔW)，∂L/∂A = scale·Bᵀ·G，∂L/∂B = scale·G·Aᵀ；凍結 W 不產生梯度
    """
    adapter = conv.adapter
    grads = conv3d_backward(merge(conv), x, grad_out)
    g = reshape(grads.params["weight"], adapter.b.shape[:1] + adapter.a.shape[1:])
    grad_a = scale_tensor(matmul(adapter.b.T, g), adapter.scale).astype(adapter.a.dtype, copy=False)
    grad_b = scale_tensor(matmul(g, adapter.a.T), adapter.scale).astype(adapter.b.dtype, copy=False)
    return LayerGrads(input_grad=grads.input_grad, params={"lora_a": grad_a, "lora_b": grad_b})


def conv_layer_forward(layer: ConvLayer, x: np.ndarray, parallel: bool = False) -> np.ndarray:
    if isinstance(layer, AdaptedConv3d):
        return adapted_forward(layer, x, parallel=parallel)
    return conv3d_forward(layer, x)


def conv_layer_backward(layer: ConvLayer, x: np.ndarray, grad_out: np.ndarray) -> LayerGrads:
    """凍結卷積只回傳輸入梯度；適配卷積另外回傳 lora_a / lora_b"""
    if isinstance(layer, AdaptedConv3d):
        return adapter_backward(layer, x, grad_out)
    return conv3d_backward(layer, x, grad_out, compute_param_grads=False)


def frozen_conv(layer: ConvLayer) -> Conv3d:
    return layer.frozen if isinstance(layer, AdaptedConv3d) else layer
