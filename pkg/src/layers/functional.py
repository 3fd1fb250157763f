#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
模型所需的其他層：GELU、ReLU、Dropout、Linear、全域平均池化、max pooling、凍結正規化
每個層都提供前向與解析式反向
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from ..errors import ArgumentError, ShapeError
from ..tensor.random import RandomSource
from .base import LayerGrads
from .conv3d import Triple, as_triple, conv_output_extents

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


# --- 啟動函數 ---

def gelu(x: np.ndarray) -> np.ndarray:
    """y = x·Φ(x)，Φ 以 erf 精確計算 (非 tanh 近似)"""
    return x * (0.5 * (1.0 + erf(x / _SQRT_2))).astype(x.dtype, copy=False)


def gelu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / _SQRT_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return (grad_out * (cdf + x * pdf)).astype(grad_out.dtype, copy=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


# --- Dropout ---

class DropoutMode(Enum):
    """Dropout 模式"""
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class Dropout:
    """Inverted dropout：訓練時存活元素乘以 1/(1−rate)，評估時為恆等映射"""
    rate: float
    mode: DropoutMode = DropoutMode.EVAL

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ArgumentError(f"dropout rate 必須在 [0, 1): {self.rate}")


def dropout_forward(
    d: Dropout, x: np.ndarray, rng: Optional[RandomSource] = None
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """回傳 (輸出, 已縮放的 mask)；eval 模式回傳輸入本身與 None"""
    if d.mode is DropoutMode.EVAL:
        return x, None
    if rng is None:
        raise ArgumentError("訓練模式的 dropout 需要 RandomSource")
    keep = rng.uniform(x.shape) >= d.rate
    mask = keep.astype(x.dtype) * x.dtype.type(1.0 / (1.0 - d.rate))
    return x * mask, mask


def dropout_backward(mask: Optional[np.ndarray], grad_out: np.ndarray) -> np.ndarray:
    return grad_out if mask is None else grad_out * mask


# --- Linear ---

@dataclass
class Linear:
    """仿射映射 y = x·Wᵀ + b，weight [out, in]，bias [out]"""
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"Linear 形狀不合法: weight {self.weight.shape}, bias {self.bias.shape}")

    @property
    def in_features(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_features(self) -> int:
        return int(self.weight.shape[0])


def linear_forward(layer: Linear, x: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != layer.in_features:
        raise ShapeError(f"Linear 輸入 {x.shape} 與 in_features {layer.in_features} 不符")
    return x @ layer.weight.T + layer.bias


def linear_backward(layer: Linear, x: np.ndarray, grad_out: np.ndarray) -> LayerGrads:
    if grad_out.shape != (x.shape[0], layer.out_features):
        raise ShapeError(f"grad_out 形狀 {grad_out.shape} 與 Linear 輸出不符")
    return LayerGrads(
        input_grad=grad_out @ layer.weight,
        params={"weight": grad_out.T @ x, "bias": grad_out.sum(axis=0)},
    )


# --- 池化 ---

def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """[n, c, D, H, W] → [n, c]，平均所有空間位置"""
    if x.ndim != 5:
        raise ShapeError(f"global_avg_pool 輸入必須是 5 維: {x.shape}")
    return x.mean(axis=(2, 3, 4))


def global_avg_pool_backward(x_shape: Tuple[int, ...], grad_out: np.ndarray) -> np.ndarray:
    voxels = int(np.prod(x_shape[2:]))
    grad = grad_out[:, :, None, None, None] / grad_out.dtype.type(voxels)
    return np.ascontiguousarray(np.broadcast_to(grad, x_shape))


@dataclass(frozen=True)
class MaxPool3d:
    """3D max pooling (padding 以 -inf 填補)"""
    kernel: Triple = (3, 3, 3)
    stride: Triple = (2, 2, 2)
    padding: Triple = (1, 1, 1)


def _max_pool_windows(pool: MaxPool3d, x: np.ndarray) -> np.ndarray:
    if x.ndim != 5:
        raise ShapeError(f"max_pool3d 輸入必須是 5 維: {x.shape}")
    padding = as_triple(pool.padding)
    out = conv_output_extents(x.shape[2:], pool.kernel, pool.stride, padding)
    if any(o < 1 for o in out):
        raise ShapeError(f"空間大小 {x.shape[2:]} 無法容納 pooling kernel {pool.kernel}")
    xp = np.pad(
        x, ((0, 0), (0, 0)) + tuple((p, p) for p in padding), constant_values=-np.inf
    )
    s0, s1, s2 = pool.stride
    view = sliding_window_view(xp, pool.kernel, axis=(2, 3, 4))[:, :, ::s0, ::s1, ::s2]
    return view.reshape(view.shape[:5] + (-1,))


def max_pool3d(pool: MaxPool3d, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """回傳 (輸出, 每個視窗中第一個最大值的扁平索引)"""
    windows = _max_pool_windows(pool, x)
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), argmax


def max_pool3d_backward(
    pool: MaxPool3d, x_shape: Tuple[int, ...], argmax: np.ndarray, grad_out: np.ndarray
) -> np.ndarray:
    padding = as_triple(pool.padding)
    padded_shape = x_shape[:2] + tuple(n + 2 * p for n, p in zip(x_shape[2:], padding))
    grad_xp = np.zeros(padded_shape, dtype=grad_out.dtype)
    s0, s1, s2 = pool.stride
    d, h, w = grad_out.shape[2:]
    for index, (a, b, c) in enumerate(itertools.product(*(range(k) for k in pool.kernel))):
        routed = np.where(argmax == index, grad_out, 0)
        grad_xp[
            :, :,
            a:a + s0 * (d - 1) + 1:s0,
            b:b + s1 * (h - 1) + 1:s1,
            c:c + s2 * (w - 1) + 1:s2,
        ] += routed
    p0, p1, p2 = padding
    D, H, W = x_shape[2:]
    return np.ascontiguousarray(grad_xp[:, :, p0:p0 + D, p1:p1 + H, p2:p2 + W])


# --- 凍結正規化 ---

@dataclass
class FrozenNorm:
    """逐通道 scale·(x − mean)/sqrt(var + eps) + shift；所有統計量固定、不可訓練"""
    scale: np.ndarray
    shift: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self) -> None:
        shapes = {a.shape for a in (self.scale, self.shift, self.running_mean, self.running_var)}
        if len(shapes) != 1 or len(next(iter(shapes))) != 1:
            raise ShapeError(f"FrozenNorm 參數必須是相同長度的一維向量: {shapes}")
        if self.eps <= 0:
            raise ArgumentError(f"eps 必須為正: {self.eps}")

    @property
    def channels(self) -> int:
        return int(self.scale.shape[0])

    def _coefficients(self, ndim: int) -> Tuple[np.ndarray, np.ndarray]:
        gain = self.scale / np.sqrt(self.running_var + self.eps)
        offset = self.shift - self.running_mean * gain
        view = (1, -1) + (1,) * (ndim - 2)
        return gain.reshape(view), offset.reshape(view)

    @classmethod
    def identity(cls, channels: int, dtype: np.dtype = np.dtype(np.float32), eps: float = 1e-5) -> FrozenNorm:
        return cls(
            scale=np.ones(channels, dtype=dtype),
            shift=np.zeros(channels, dtype=dtype),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
            eps=eps,
        )


def frozen_norm_forward(norm: FrozenNorm, x: np.ndarray) -> np.ndarray:
    if x.ndim < 2 or x.shape[1] != norm.channels:
        raise ShapeError(f"FrozenNorm 通道數 {norm.channels} 與輸入 {x.shape} 不符")
    gain, offset = norm._coefficients(x.ndim)
    return (x * gain + offset).astype(x.dtype, copy=False)


def frozen_norm_backward(norm: FrozenNorm, grad_out: np.ndarray) -> np.ndarray:
    """只回傳輸入梯度；正規化參數永遠不出現在梯度中"""
    gain, _ = norm._coefficients(grad_out.ndim)
    return (grad_out * gain).astype(grad_out.dtype, copy=False)
