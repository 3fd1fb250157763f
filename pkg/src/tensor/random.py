#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
可重現的亂數來源

產生器: numpy 的 PCG64 (128-bit state, 64-bit 輸出)，以 64-bit 非負整數 seed 初始化。
均勻亂數只使用 Generator.random() (double, [0, 1))，其輸出串流在各平台一致。

高斯取樣: Box-Muller，每對均勻亂數 (u1, u2) 產生兩個樣本
    z0 = sqrt(-2 ln(1 - u1)) · cos(2π u2)
    z1 = sqrt(-2 ln(1 - u1)) · sin(2π u2)
兩個輸出都會使用；n 個樣本固定消耗 2·ceil(n/2) 個均勻亂數。

洗牌: 以 n 個均勻亂數做 stable argsort，不依賴 numpy 的 permutation 實作細節。
"""

from __future__ import annotations

from typing import Sequence, Tuple, Union

import numpy as np

from ..errors import ArgumentError

_MAX_SEED = 2**64 - 1


class RandomSource:
    """單一擁有者的亂數串流 (不可跨執行緒共用)"""

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= _MAX_SEED:
            raise ArgumentError(f"seed 必須是 64-bit 非負整數: {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, offset: int) -> RandomSource:
        """衍生串流 seed + offset (例如每個 fold 一條)"""
        return RandomSource(self.seed + offset)

    def uniform(self, shape: Union[int, Sequence[int]]) -> np.ndarray:
        return self._generator.random(shape)

    def gaussian(
        self, shape: Union[int, Sequence[int]], mean: float = 0.0, std: float = 1.0
    ) -> np.ndarray:
        if std < 0:
            raise ArgumentError(f"標準差不可為負: {std}")
        dims: Tuple[int, ...] = (shape,) if isinstance(shape, int) else tuple(shape)
        count = int(np.prod(dims)) if dims else 1
        pairs = (count + 1) // 2
        draws = self._generator.random(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-draws[:, 0]))
        angle = 2.0 * np.pi * draws[:, 1]
        z = np.empty((pairs, 2), dtype=np.float64)
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return (z.reshape(-1)[:count] * std + mean).reshape(dims)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self._generator.random(n), kind="stable")

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"
