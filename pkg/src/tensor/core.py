#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
張量核心運算
以 numpy.ndarray (C-contiguous, row-major) 作為張量型別，
在其上提供帶有形狀檢查的基本運算
"""

from __future__ import annotations

from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

from ..errors import ArgumentError, DimensionError
from .random import RandomSource

Shape = Tuple[int, ...]
ShapeLike = Union[int, Sequence[int]]


class DType(Enum):
    """元素精度 (code 與 checkpoint / volume 檔案格式共用)"""
    FLOAT32 = (0, np.float32, "float32")
    FLOAT64 = (1, np.float64, "float64")

    def __init__(self, code: int, numpy_type: type, label: str):
        self.code = code
        self.numpy_type = numpy_type
        self.label = label

    @property
    def numpy(self) -> np.dtype:
        return np.dtype(self.numpy_type)

    @classmethod
    def from_code(cls, code: int) -> DType:
        for dtype in cls:
            if dtype.code == code:
                return dtype
        raise ArgumentError(f"未知的 dtype code: {code}")

    @classmethod
    def from_numpy(cls, dtype: np.dtype) -> DType:
        for member in cls:
            if member.numpy == np.dtype(dtype):
                return member
        raise ArgumentError(f"不支援的元素型別: {dtype}")

    @classmethod
    def from_label(cls, label: str) -> DType:
        for member in cls:
            if member.label == label:
                return member
        raise ArgumentError(f"未知的 dtype: {label}")


def _normalize_shape(shape: ShapeLike) -> Shape:
    dims = (shape,) if isinstance(shape, int) else tuple(int(d) for d in shape)
    if any(d < 1 for d in dims):
        raise DimensionError(f"shape 各維度必須 ≥ 1: {dims}")
    return dims


def zeros(shape: ShapeLike, dtype: DType = DType.FLOAT32) -> np.ndarray:
    return np.zeros(_normalize_shape(shape), dtype=dtype.numpy)


def ones(shape: ShapeLike, dtype: DType = DType.FLOAT32) -> np.ndarray:
    return np.ones(_normalize_shape(shape), dtype=dtype.numpy)


def _require_same_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    # 不支援 broadcasting
    if a.shape != b.shape:
        raise DimensionError(f"{op}: 形狀不符 {a.shape} vs {b.shape}")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "add")
    return a + b


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "sub")
    return a - b


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """逐元素乘法"""
    _require_same_shape(a, b, "multiply")
    return a * b


def scale(a: np.ndarray, factor: float) -> np.ndarray:
    return a * a.dtype.type(factor)


def tensor_sum(a: np.ndarray) -> float:
    return float(np.sum(a, dtype=np.float64))


def tensor_mean(a: np.ndarray) -> float:
    return float(np.mean(a, dtype=np.float64))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """矩陣乘法 c[i,j] = Σ_p a[i,p]·b[p,j]"""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: 內部維度不符 {a.shape} × {b.shape}")
    return a @ b


def reshape(t: np.ndarray, new_shape: ShapeLike) -> np.ndarray:
    """
    以新形狀解讀同一份 row-major 資料

    [d_out, d_in, k, k, k] → [d_out, d_in·k³] 時，
    元素 (o, i, a, b, c) 對應到 (o, i·k³ + a·k² + b·k + c)
    """
    shape = _normalize_shape(new_shape)
    if int(np.prod(shape)) != t.size:
        raise DimensionError(f"reshape: 元素數量不符 {t.shape} → {shape}")
    return np.ascontiguousarray(t).reshape(shape)


def gaussian_fill(
    t: np.ndarray, rng: RandomSource, mean: float = 0.0, std: float = 1.0
) -> np.ndarray:
    """以 N(mean, std²) 樣本填滿與 t 同形狀、同精度的新張量 (Box-Muller，見 RandomSource)"""
    if std < 0:
        raise ArgumentError(f"標準差不可為負: {std}")
    samples = rng.gaussian(t.shape, mean=mean, std=std)
    return samples.astype(t.dtype, copy=False)
