#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
體積前處理：三線性重取樣與逐通道 z-score
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from ..errors import DimensionError

NORMALIZE_EPS = 1e-8


def _axis_positions(source: int, target: int) -> np.ndarray:
    """角點對齊: t·(S−1)/(T−1)；T = 1 時取中心"""
    if target == 1:
        return np.array([(source - 1) / 2.0])
    return np.arange(target, dtype=np.float64) * ((source - 1) / (target - 1))


def resize_trilinear(volume: np.ndarray, target: Sequence[int]) -> np.ndarray:
    """[c, D, H, W] → [c, D', H', W']，逐通道三線性內插"""
    if volume.ndim != 4:
        raise DimensionError(f"體積必須是 [c, D, H, W]: {volume.shape}")
    target = tuple(int(t) for t in target)
    if len(target) != 3 or any(t < 1 for t in target):
        raise DimensionError(f"目標大小必須是 3 個正整數: {target}")
    if target == volume.shape[1:]:
        return volume.copy()

    axes = [_axis_positions(s, t) for s, t in zip(volume.shape[1:], target)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"))
    out = np.empty((volume.shape[0],) + target, dtype=volume.dtype)
    for channel in range(volume.shape[0]):
        out[channel] = map_coordinates(
            volume[channel].astype(np.float64), grid, order=1, mode="nearest"
        )
    return out


def normalize(volume: np.ndarray) -> np.ndarray:
    """逐通道 (x − mean_c) / (std_c + 1e-8)；常數通道變成全 0"""
    if volume.ndim < 2:
        raise DimensionError(f"體積至少需要通道軸: {volume.shape}")
    axes = tuple(range(1, volume.ndim))
    x = volume.astype(np.float64)
    mean = x.mean(axis=axes, keepdims=True)
    std = x.std(axis=axes, keepdims=True)
    return ((x - mean) / (std + NORMALIZE_EPS)).astype(volume.dtype)


def prepare_volume(volume: np.ndarray, target: Sequence[int], apply_normalize: bool = True) -> np.ndarray:
    """重取樣到訓練網格後 (選擇性) 正規化"""
    resized = resize_trilinear(volume, target)
    return normalize(resized) if apply_normalize else resized
