#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
3D 卷積層 (cross-correlation，不翻轉 kernel，僅支援 zero padding)

前向與反向都以 sliding_window_view 取出 patch 後用 tensordot 計算 (im2col 形式)，
結果與六層迴圈的直接加總一致
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ArgumentError, ShapeError
from .base import LayerGrads

Triple = Tuple[int, int, int]


def as_triple(value: Union[int, Sequence[int]]) -> Triple:
    if isinstance(value, (int, np.integer)):
        return (int(value),) * 3
    values = tuple(int(v) for v in value)
    if len(values) != 3:
        raise ArgumentError(f"需要 3 個軸的設定: {value}")
    return values  # type: ignore[return-value]


@dataclass
class Conv3d:
    """3D 卷積：weight [d_out, d_in, k, k, k]，可選 bias [d_out]"""
    weight: np.ndarray
    bias: Optional[np.ndarray] = None
    stride: Triple = (1, 1, 1)
    padding: Triple = (0, 0, 0)

    def __post_init__(self) -> None:
        self.stride = as_triple(self.stride)
        self.padding = as_triple(self.padding)
        if self.weight.ndim != 5:
            raise ShapeError(f"Conv3d weight 必須是 5 維: {self.weight.shape}")
        if any(s < 1 for s in self.stride):
            raise ArgumentError(f"stride 必須為正整數: {self.stride}")
        if any(p < 0 for p in self.padding):
            raise ArgumentError(f"padding 不可為負: {self.padding}")
        if self.bias is not None and self.bias.shape != (self.out_channels,):
            raise ShapeError(f"bias 形狀 {self.bias.shape} 與輸出通道 {self.out_channels} 不符")

    @property
    def out_channels(self) -> int:
        return int(self.weight.shape[0])

    @property
    def in_channels(self) -> int:
        return int(self.weight.shape[1])

    @property
    def kernel_size(self) -> Triple:
        return tuple(int(k) for k in self.weight.shape[2:])  # type: ignore[return-value]

    def output_extents(self, extents: Sequence[int]) -> Triple:
        """每軸輸出大小 floor((in + 2·pad − k)/stride) + 1"""
        return conv_output_extents(extents, self.kernel_size, self.stride, self.padding)


def conv_output_extents(
    extents: Sequence[int], kernel: Sequence[int], stride: Sequence[int], padding: Sequence[int]
) -> Triple:
    return tuple(  # type: ignore[return-value]
        (int(n) + 2 * p - k) // s + 1 for n, k, s, p in zip(extents, kernel, stride, padding)
    )


def _check_input(layer: Conv3d, x: np.ndarray) -> Triple:
    if x.ndim != 5:
        raise ShapeError(f"Conv3d 輸入必須是 [n, c, D, H, W]: {x.shape}")
    if x.shape[1] != layer.in_channels:
        raise ShapeError(f"輸入通道 {x.shape[1]} 與 weight 的 d_in {layer.in_channels} 不符")
    out = layer.output_extents(x.shape[2:])
    padded = [n + 2 * p for n, p in zip(x.shape[2:], layer.padding)]
    if any(o < 1 for o in out) or any(pn < k for pn, k in zip(padded, layer.kernel_size)):
        raise ShapeError(f"空間大小 {x.shape[2:]} 無法容納 kernel {layer.kernel_size}")
    return out


def _pad(x: np.ndarray, padding: Triple) -> np.ndarray:
    if not any(padding):
        return x
    return np.pad(x, ((0, 0), (0, 0)) + tuple((p, p) for p in padding))


def _windows(xp: np.ndarray, layer: Conv3d) -> np.ndarray:
    """[n, c, D', H', W', k, k, k] 的 patch view"""
    s0, s1, s2 = layer.stride
    view = sliding_window_view(xp, layer.kernel_size, axis=(2, 3, 4))
    return view[:, :, ::s0, ::s1, ::s2]


def conv3d_forward(layer: Conv3d, x: np.ndarray) -> np.ndarray:
    _check_input(layer, x)
    windows = _windows(_pad(x, layer.padding), layer)
    out = np.tensordot(windows, layer.weight, axes=([1, 5, 6, 7], [1, 2, 3, 4]))
    out = np.ascontiguousarray(np.moveaxis(out, -1, 1))
    if layer.bias is not None:
        out += layer.bias.reshape(1, -1, 1, 1, 1)
    return out


def conv3d_backward(
    layer: Conv3d, x: np.ndarray, grad_out: np.ndarray, compute_param_grads: bool = True
) -> LayerGrads:
    """
    回傳 ∂L/∂x，以及 (compute_param_grads 時) ∂L/∂weight、∂L/∂bias

    凍結的 backbone 卷積只需要輸入梯度，可關閉參數梯度以省下一次 tensordot
    """
    out_extents = _check_input(layer, x)
    expected = (x.shape[0], layer.out_channels) + out_extents
    if grad_out.shape != expected:
        raise ShapeError(f"grad_out 形狀 {grad_out.shape} 與前向輸出 {expected} 不符")

    xp = _pad(x, layer.padding)
    params = {}
    if compute_param_grads:
        windows = _windows(xp, layer)
        params["weight"] = np.tensordot(grad_out, windows, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
        if layer.bias is not None:
            params["bias"] = grad_out.sum(axis=(0, 2, 3, 4))

    # cols[n, D', H', W', c, a, b, c'] = Σ_o grad_out[n, o, ...] · weight[o, c, a, b, c']
    cols = np.tensordot(grad_out, layer.weight, axes=([1], [0]))
    cols = np.moveaxis(cols, 4, 1)
    grad_xp = np.zeros(xp.shape, dtype=np.result_type(grad_out, layer.weight))
    s0, s1, s2 = layer.stride
    d, h, w = out_extents
    for a, b, c in itertools.product(*(range(k) for k in layer.kernel_size)):
        grad_xp[
            :, :,
            a:a + s0 * (d - 1) + 1:s0,
            b:b + s1 * (h - 1) + 1:s1,
            c:c + s2 * (w - 1) + 1:s2,
        ] += cols[..., a, b, c]

    p0, p1, p2 = layer.padding
    D, H, W = x.shape[2:]
    grad_x = np.ascontiguousarray(grad_xp[:, :, p0:p0 + D, p1:p1 + H, p2:p2 + W])
    return LayerGrads(input_grad=grad_x, params=params)
