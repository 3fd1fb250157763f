#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
體積資料倉庫
延遲載入 manifest 中的體積，重取樣 (與正規化) 後快取，只處理一次
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import ConfigurationError, DimensionError
from ..tensor.core import DType
from .manifest import Manifest
from .transforms import prepare_volume
from .volume_io import load_volume

logger = logging.getLogger(__name__)


@dataclass
class VolumeSet:
    """已前處理的樣本集合：x [n, c, D, H, W]、labels [n]"""
    subject_ids: List[str]
    x: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.x.ndim != 5 or self.x.shape[0] != len(self.subject_ids) or self.labels.shape != (len(self.subject_ids),):
            raise DimensionError(
                f"VolumeSet 形狀不一致: ids {len(self.subject_ids)}, x {self.x.shape}, labels {self.labels.shape}"
            )

    def __len__(self) -> int:
        return len(self.subject_ids)

    def take(self, indices: Sequence[int]) -> VolumeSet:
        idx = np.asarray(indices, dtype=np.int64)
        return VolumeSet([self.subject_ids[i] for i in idx], self.x[idx], self.labels[idx])


class VolumeRepository:
    """資料倉庫 - 統一管理體積載入與前處理"""

    def __init__(
        self,
        manifest: Manifest,
        extents: Sequence[int],
        normalize: bool = True,
        dtype: DType = DType.FLOAT32,
        channels: Optional[int] = None,
    ):
        self.manifest = manifest
        self.extents = tuple(int(e) for e in extents)
        self.normalize = normalize
        self.dtype = dtype
        self.channels = channels
        self._cache: Dict[str, np.ndarray] = {}

    def volume(self, subject_id: str) -> np.ndarray:
        """延遲載入單一受試者的前處理體積"""
        if subject_id not in self._cache:
            entry = self.manifest.by_id().get(subject_id)
            if entry is None:
                raise ConfigurationError(f"manifest 中沒有 subject: {subject_id}", field="subject_id")
            raw = load_volume(self.manifest.volume_path(entry))
            if self.channels is not None and raw.shape[0] != self.channels:
                raise DimensionError(
                    f"{subject_id}: 通道數 {raw.shape[0]} 與模型輸入 {self.channels} 不符"
                )
            self._cache[subject_id] = prepare_volume(raw, self.extents, self.normalize).astype(self.dtype.numpy)
        return self._cache[subject_id]

    def volume_set(self, subject_ids: Optional[Sequence[str]] = None) -> VolumeSet:
        ids = list(subject_ids) if subject_ids is not None else self.manifest.subject_ids
        if not ids:
            raise ConfigurationError("樣本集合是空的")
        lookup = self.manifest.by_id()
        x = np.stack([self.volume(s) for s in ids])
        labels = np.array([int(lookup[s].label) for s in ids], dtype=np.int64)
        return VolumeSet(ids, x, labels)

    def load_all(self) -> VolumeSet:
        data = self.volume_set()
        logger.info(f"📊 已載入 {len(data)} 個體積 → {self.extents} (normalize={self.normalize})")
        return data

    def clear(self) -> None:
        self._cache.clear()
        logger.info("🔄 已清除體積快取")
