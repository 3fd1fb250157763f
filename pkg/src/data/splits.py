#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
分層 k-fold 切分
每個類別內先依 subject_id 排序，再以 RandomSource 洗牌，最後從 fold 0 起輪流發牌
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

from ..errors import ConfigurationError
from ..tensor.random import RandomSource
from .manifest import DiagnosisLabel, Manifest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldSplit:
    """k 個驗證 fold (subject_id 清單)；fold i 的訓練集為其餘所有受試者"""
    folds: Tuple[Tuple[str, ...], ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def validation_ids(self, fold: int) -> List[str]:
        return list(self.folds[fold])

    def train_ids(self, fold: int) -> List[str]:
        return [s for i, ids in enumerate(self.folds) if i != fold for s in ids]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "folds": [list(f) for f in self.folds]}


def stratified_kfold(manifest: Manifest, k: int, seed: int) -> FoldSplit:
    if k < 2:
        raise ConfigurationError(f"fold 數至少為 2: {k}", field="train.folds")
    rng = RandomSource(seed)
    folds: List[List[str]] = [[] for _ in range(k)]
    for label in DiagnosisLabel:
        members = sorted(e.subject_id for e in manifest if e.label == label)
        if len(members) < k:
            raise ConfigurationError(
                f"類別 {label.name} 只有 {len(members)} 位受試者，少於 fold 數 {k}", field="train.folds"
            )
        order = rng.permutation(len(members))
        for position, index in enumerate(order):
            folds[position % k].append(members[index])
    split = FoldSplit(folds=tuple(tuple(f) for f in folds), seed=seed)
    logger.info(f"📊 分層切分 k={k}: fold 大小 {[len(f) for f in split.folds]}")
    return split
