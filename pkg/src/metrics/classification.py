#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
二元分類指標：混淆矩陣、accuracy、ROC 曲線與 AUC

預測規則: score ≥ τ 判為陽性 (ADHD)。
ROC 的閾值為 +∞ 加上每個相異分數 (由大到小)，同分樣本整塊移動，形成對角線段；
AUC 以梯形積分計算，另提供 Mann-Whitney 秩統計量作為對照 (同分一對計 0.5)。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from ..data.tables import write_table
from ..errors import ArgumentError, DegenerateInputError

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def tpr(self) -> float:
        positives = self.tp + self.fn
        return self.tp / positives if positives else 0.0

    @property
    def fpr(self) -> float:
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else 0.0

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class RocCurve:
    """
    依閾值由大到小排列的 (FPR, TPR) 點；第一個閾值為 +∞
    tp / fp 保存每個點的累計計數，AUC 以整數計數積分
    """
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    tp: Optional[np.ndarray] = None
    fp: Optional[np.ndarray] = None

    def points(self) -> list[Tuple[float, float]]:
        return [(float(x), float(y)) for x, y in zip(self.fpr, self.tpr)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def _validate(scores: ArrayLike, labels: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ArgumentError(f"scores 與 labels 長度不符: {s.shape[0]} vs {y.shape[0]}")
    if not np.isin(y, (0, 1)).all():
        raise ArgumentError(f"labels 必須為 0 或 1: {np.unique(y).tolist()}")
    return s, y.astype(np.int64)


def _require_both_classes(y: np.ndarray) -> Tuple[int, int]:
    positives = int(y.sum())
    negatives = int(y.size - positives)
    if positives == 0 or negatives == 0:
        raise DegenerateInputError(f"需要兩個類別 (陽性 {positives}, 陰性 {negatives})")
    return positives, negatives


def confusion(scores: ArrayLike, labels: ArrayLike, threshold: float = 0.5) -> ConfusionMatrix:
    s, y = _validate(scores, labels)
    predicted = s >= threshold
    positive = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(predicted & positive)),
        tn=int(np.sum(~predicted & ~positive)),
        fp=int(np.sum(predicted & ~positive)),
        fn=int(np.sum(~predicted & positive)),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ArgumentError("空的混淆矩陣沒有 accuracy")
    return (cm.tp + cm.tn) / cm.total


def roc_curve(scores: ArrayLike, labels: ArrayLike) -> RocCurve:
    s, y = _validate(scores, labels)
    positives, negatives = _require_both_classes(y)

    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # 每個相異分數區塊的最後一個索引
    distinct = np.flatnonzero(np.diff(s_sorted)) if s_sorted.size > 1 else np.array([], dtype=np.int64)
    block_ends = np.concatenate([distinct, [s_sorted.size - 1]])

    tp = np.concatenate([[0], np.cumsum(y_sorted)[block_ends]])
    fp = np.concatenate([[0], np.cumsum(1 - y_sorted)[block_ends]])
    thresholds = np.concatenate([[np.inf], s_sorted[block_ends]])
    return RocCurve(
        fpr=fp / negatives,
        tpr=tp / positives,
        thresholds=thresholds,
        tp=tp.astype(np.int64),
        fp=fp.astype(np.int64),
    )


def auc(curve: RocCurve) -> float:
    """梯形積分；有計數時以整數運算避免累積誤差"""
    if curve.tp is not None and curve.fp is not None:
        positives, negatives = int(curve.tp[-1]), int(curve.fp[-1])
        if positives == 0 or negatives == 0:
            raise DegenerateInputError("ROC 曲線只有單一類別")
        doubled = int(np.sum(np.diff(curve.fp) * (curve.tp[1:] + curve.tp[:-1])))
        return doubled / (2 * positives * negatives)
    return float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1]) / 2.0))


def auc_rank_oracle(scores: ArrayLike, labels: ArrayLike) -> float:
    """(一致對數 + 0.5·同分對數) / (n_pos·n_neg)，以平均秩計算"""
    s, y = _validate(scores, labels)
    positives, negatives = _require_both_classes(y)
    ranks = rankdata(s, method="average")
    u = float(ranks[y == 1].sum()) - positives * (positives + 1) / 2.0
    return u / (positives * negatives)


def roc_auc(scores: ArrayLike, labels: ArrayLike) -> float:
    return auc(roc_curve(scores, labels))


def export_roc_csv(curve: RocCurve, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
    """(threshold, fpr, tpr) 每列一點"""
    written = write_table(curve.to_frame(), path, config_hash)
    logger.info(f"💾 ROC 曲線已寫出: {written}")
    return written
