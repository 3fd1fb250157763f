#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
單一 fold 的訓練迴圈

每個 epoch: 以 rng 洗牌 → mini-batch 前向 (train 模式) → BCE → 反傳 (head 與 adapter) → AdamW；
epoch 結束後逐一評估驗證樣本，分別保留最高 accuracy 與最高 AUC 的 checkpoint (同分取較早 epoch)。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..config import ExperimentConfig, config_hash as compute_config_hash
from ..data.repository import VolumeSet
from ..data.tables import read_table, write_table
from ..errors import ConfigurationError, DegenerateInputError
from ..metrics.classification import accuracy, confusion, roc_auc
from ..models.classifier import AdhdClassifier
from ..tensor.random import RandomSource
from .checkpoint import Checkpoint
from .losses import bce_with_logits_batch
from .optimizer import AdamW, default_param_groups

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "train_loss", "val_acc", "val_auc"]


class SelectionMetric(str, Enum):
    """checkpoint 選擇依據"""
    ACCURACY = "best_acc"
    AUC = "best_auc"


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    val_acc: float
    val_auc: float


@dataclass
class TrainLog:
    rows: List[EpochLog] = field(default_factory=list)

    def append(self, row: EpochLog) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([(r.epoch, r.train_loss, r.val_acc, r.val_auc) for r in self.rows], columns=LOG_COLUMNS)

    def save(self, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
        return write_table(self.to_frame(), path, config_hash)

    @classmethod
    def load(cls, path: Union[str, Path]) -> TrainLog:
        frame = read_table(path)
        return cls([
            EpochLog(int(r.epoch), float(r.train_loss), float(r.val_acc), float(r.val_auc))
            for r in frame.itertuples(index=False)
        ])


@dataclass
class FoldResult:
    fold: int
    log: TrainLog
    best_acc: Checkpoint
    best_auc: Checkpoint
    val_ids: List[str] = field(default_factory=list)

    def metrics(self, selection: SelectionMetric) -> Dict[str, Any]:
        checkpoint = self.best_acc if selection == SelectionMetric.ACCURACY else self.best_auc
        return {
            "epoch": checkpoint.metadata["epoch"],
            "accuracy": checkpoint.metadata["val_acc"],
            "auc": checkpoint.metadata["val_auc"],
        }


# --- 評估 ---

def evaluate_scores(model: AdhdClassifier, x: np.ndarray) -> np.ndarray:
    """逐一樣本計算 ADHD 分數 (eval 模式)；訓練與 eval 指令共用此函數"""
    return np.array([model.predict_score(x[i:i + 1])[0] for i in range(x.shape[0])], dtype=np.float64)


def score_metrics(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> Tuple[float, float]:
    """(accuracy, AUC)；單一類別時 AUC 為 NaN"""
    acc = accuracy(confusion(scores, labels, threshold))
    try:
        auc_value = roc_auc(scores, labels)
    except DegenerateInputError:
        auc_value = math.nan
    return acc, auc_value


# --- 訓練 ---

def snapshot(
    model: AdhdClassifier,
    metadata: Dict[str, Any],
    include_backbone: bool = False,
) -> Checkpoint:
    """可訓練參數 (與選擇性的凍結張量) 的複本"""
    tensors = {name: value.copy() for name, value in model.trainable_parameters().items()}
    if include_backbone:
        tensors.update({name: value.copy() for name, value in model.frozen_tensors().items()})
    return Checkpoint(tensors=tensors, metadata=dict(metadata))


def _improves(value: float, best: Optional[float]) -> bool:
    # 嚴格大於：同分保留較早的 epoch
    if best is None:
        return True
    if math.isnan(value):
        return False
    return math.isnan(best) or value > best


def train_fold(
    model: AdhdClassifier,
    train: VolumeSet,
    val: VolumeSet,
    cfg: ExperimentConfig,
    rng: RandomSource,
    fold: int = 0,
    extra_metadata: Optional[Dict[str, Any]] = None,
) -> FoldResult:
    """訓練一個 fold，回傳逐 epoch 紀錄與兩個最佳 checkpoint"""
    if len(train) == 0 or len(val) == 0:
        raise ConfigurationError(f"fold {fold}: 訓練集 ({len(train)}) 與驗證集 ({len(val)}) 皆不可為空")
    overlap = set(train.subject_ids) & set(val.subject_ids)
    if overlap:
        raise ConfigurationError(f"fold {fold}: 訓練集與驗證集重疊: {sorted(overlap)[0]}")

    t = cfg.train
    params = model.trainable_parameters()
    optimizer = AdamW(
        params,
        default_param_groups(list(params), t.lr_lora, t.lr_head, t.weight_decay),
        beta1=t.beta1, beta2=t.beta2, eps=t.eps,
    )
    base_metadata = {
        "config": cfg.to_dict(),
        "config_hash": compute_config_hash(cfg),
        "fold": fold,
        "seed": t.seed,
        "merged": False,
        **(extra_metadata or {}),
    }

    log = TrainLog()
    best: Dict[SelectionMetric, Tuple[Optional[float], Optional[Checkpoint]]] = {
        SelectionMetric.ACCURACY: (None, None),
        SelectionMetric.AUC: (None, None),
    }
    for epoch in range(1, t.epochs + 1):
        order = rng.permutation(len(train))
        total_loss = 0.0
        for start in range(0, len(train), t.batch_size):
            idx = order[start:start + t.batch_size]
            logits, cache = model.forward(train.x[idx], train=True, rng=rng)
            loss, grad_logits = bce_with_logits_batch(logits, train.labels[idx])
            optimizer.step(model.backward(cache, grad_logits))
            total_loss += loss * len(idx)

        scores = evaluate_scores(model, val.x)
        val_acc, val_auc = score_metrics(scores, val.labels, t.threshold)
        row = EpochLog(epoch, total_loss / len(train), val_acc, val_auc)
        log.append(row)
        logger.info(
            f"📊 fold {fold} epoch {epoch}/{t.epochs}: loss={row.train_loss:.4f} "
            f"val_acc={val_acc:.4f} val_auc={val_auc:.4f}"
        )

        for selection, value in ((SelectionMetric.ACCURACY, val_acc), (SelectionMetric.AUC, val_auc)):
            if _improves(value, best[selection][0]):
                metadata = {**base_metadata, "epoch": epoch, "selection": selection.value,
                            "val_acc": val_acc, "val_auc": val_auc}
                best[selection] = (value, snapshot(model, metadata))

    best_acc, best_auc = best[SelectionMetric.ACCURACY][1], best[SelectionMetric.AUC][1]
    assert best_acc is not None and best_auc is not None
    logger.info(
        f"✅ fold {fold} 完成: best_acc={best_acc.metadata['val_acc']:.4f} (epoch {best_acc.metadata['epoch']}), "
        f"best_auc={best_auc.metadata['val_auc']:.4f} (epoch {best_auc.metadata['epoch']})"
    )
    return FoldResult(fold=fold, log=log, best_acc=best_acc, best_auc=best_auc, val_ids=list(val.subject_ids))
