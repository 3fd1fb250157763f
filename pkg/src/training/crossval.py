#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
分層 k-fold 交叉驗證

同一次執行中所有 fold 共用同一組凍結 backbone (由 base seed 抽取或從 model.weights 載入)；
adapter、head、洗牌與 dropout 使用各 fold 的串流 seed + fold_index。
train.jobs > 1 時以 process pool 平行執行各 fold，結果依 fold 編號排序後彙整。
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..config import ExperimentConfig, config_hash
from ..data.manifest import Manifest, ManifestEntry
from ..data.repository import VolumeRepository, VolumeSet
from ..data.splits import FoldSplit, stratified_kfold
from ..errors import CheckpointLoadError, ConfigurationError
from ..models.backbone import build_backbone
from ..models.classifier import AdhdClassifier, build_classifier
from ..tensor.random import RandomSource
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint, tensor_digest
from .trainer import FoldResult, SelectionMetric, train_fold

logger = logging.getLogger(__name__)

BACKBONE_FROM_SEED = "seed"
BACKBONE_FROM_FILE = "file"


# --- backbone 與模型還原 ---

def shared_backbone_weights(cfg: ExperimentConfig) -> Dict[str, np.ndarray]:
    """整次執行共用的凍結張量：model.weights 指定的 checkpoint，否則由 train.seed 抽取"""
    backbone_config = cfg.model.backbone()
    if cfg.model.weights:
        checkpoint = load_checkpoint(cfg.model.weights)
        weights = checkpoint.backbone_tensors
        if not weights:
            raise CheckpointLoadError("backbone.*", f"{cfg.model.weights} 不含 backbone 張量")
        logger.info(f"📊 使用 checkpoint backbone: {cfg.model.weights}")
        return weights
    backbone = build_backbone(backbone_config, RandomSource(cfg.train.seed), cfg.model.tensor_dtype)
    return backbone.frozen_tensors()


def backbone_source(cfg: ExperimentConfig) -> Dict[str, Any]:
    if cfg.model.weights:
        return {"source": BACKBONE_FROM_FILE, "path": str(cfg.model.weights)}
    return {"source": BACKBONE_FROM_SEED, "seed": cfg.train.seed}


def build_fold_model(
    cfg: ExperimentConfig, weights: Mapping[str, np.ndarray], fold: int
) -> Tuple[AdhdClassifier, RandomSource]:
    """fold 模型與該 fold 的亂數串流 (adapter → head → 洗牌 / dropout)"""
    rng = RandomSource(cfg.train.seed + fold)
    model = build_classifier(
        cfg.model.backbone(),
        cfg.rank,
        rng,
        weights=weights,
        scale=cfg.lora.scale,
        exclude=cfg.lora.exclude,
        hidden_units=cfg.model.hidden_units,
        dropout=cfg.model.dropout,
        dtype=cfg.model.tensor_dtype,
    )
    return model, rng


def restore_model(checkpoint: Checkpoint, weights: Optional[Mapping[str, np.ndarray]] = None) -> AdhdClassifier:
    """
    依 checkpoint metadata 中的設定重建模型並載入張量
    backbone 來源優先順序: 參數 weights → checkpoint 內的 backbone 張量 → metadata 記錄的來源
    """
    if "config" not in checkpoint.metadata:
        raise CheckpointLoadError("<metadata>", "checkpoint 沒有內嵌設定")
    try:
        cfg = ExperimentConfig.model_validate(checkpoint.metadata["config"])
    except ValueError as e:
        raise CheckpointLoadError("<metadata>", f"內嵌設定不合法: {e}") from e

    if weights is None:
        weights = checkpoint.backbone_tensors or None
    if weights is None:
        weights = shared_backbone_weights(cfg)

    expected = checkpoint.metadata.get("backbone_digest")
    if expected is not None and not checkpoint.metadata.get("merged") and tensor_digest(weights) != expected:
        raise CheckpointLoadError("backbone.*", "backbone 與訓練時使用的權重不同")

    rank = None if checkpoint.metadata.get("merged") else cfg.rank
    model = build_classifier(
        cfg.model.backbone(), rank, RandomSource(cfg.train.seed), weights=weights,
        scale=cfg.lora.scale, exclude=cfg.lora.exclude,
        hidden_units=cfg.model.hidden_units, dropout=cfg.model.dropout, dtype=cfg.model.tensor_dtype,
    )
    backbone = checkpoint.backbone_tensors
    model.load_tensors({k: v for k, v in checkpoint.tensors.items() if k not in backbone})
    return model


def checkpoint_config(checkpoint: Checkpoint) -> ExperimentConfig:
    return ExperimentConfig.model_validate(checkpoint.metadata["config"])


# --- 交叉驗證 ---

@dataclass
class CrossValResult:
    split: FoldSplit
    folds: List[FoldResult]
    backbone_digest: str
    final_backbone_digests: List[str] = field(default_factory=list)

    def mean(self, selection: SelectionMetric) -> Dict[str, float]:
        rows = [f.metrics(selection) for f in self.folds]
        return {
            "accuracy": float(np.mean([r["accuracy"] for r in rows])),
            "auc": float(np.mean([r["auc"] for r in rows])),
        }


def _run_fold(
    cfg_data: Dict[str, Any],
    weights: Dict[str, np.ndarray],
    train: VolumeSet,
    val: VolumeSet,
    fold: int,
    metadata: Dict[str, Any],
) -> Tuple[FoldResult, str]:
    cfg = ExperimentConfig.model_validate(cfg_data)
    model, rng = build_fold_model(cfg, weights, fold)
    result = train_fold(model, train, val, cfg, rng, fold=fold, extra_metadata=metadata)
    return result, tensor_digest(model.frozen_tensors())


def _check_class_counts(manifest: Manifest, k: int) -> None:
    for label, count in manifest.class_counts().items():
        if count < k:
            raise ConfigurationError(
                f"類別 {label.name} 只有 {count} 位受試者，少於 fold 數 {k}", field="train.folds"
            )


def run_crossval(
    manifest: Manifest,
    cfg: ExperimentConfig,
    data: Optional[VolumeSet] = None,
    jobs: Optional[int] = None,
) -> CrossValResult:
    """建立 k 個分層 fold，每個 fold 以新的 adapter 與 head 訓練"""
    k = cfg.train.folds
    _check_class_counts(manifest, k)
    split = stratified_kfold(manifest, k, cfg.train.seed)

    if data is None:
        repository = VolumeRepository(
            manifest, cfg.model.input_extents, cfg.data.normalize,
            cfg.model.tensor_dtype, channels=cfg.model.in_channels,
        )
        data = repository.load_all()
    index = {s: i for i, s in enumerate(data.subject_ids)}

    weights = shared_backbone_weights(cfg)
    digest = tensor_digest(weights)
    metadata = {"backbone": backbone_source(cfg), "backbone_digest": digest}

    tasks = []
    for fold in range(k):
        train = data.take([index[s] for s in split.train_ids(fold)])
        val = data.take([index[s] for s in split.validation_ids(fold)])
        tasks.append((cfg.to_dict(), weights, train, val, fold, metadata))

    workers = jobs if jobs is not None else cfg.train.jobs
    logger.info(f"🎯 {k}-fold 交叉驗證開始 (jobs={workers}, config={config_hash(cfg)[:12]})")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, k)) as pool:
            outcomes = list(pool.map(_run_fold, *zip(*tasks)))
    else:
        outcomes = [_run_fold(*task) for task in tasks]

    outcomes.sort(key=lambda item: item[0].fold)
    result = CrossValResult(
        split=split,
        folds=[o[0] for o in outcomes],
        backbone_digest=digest,
        final_backbone_digests=[o[1] for o in outcomes],
    )
    for selection in SelectionMetric:
        mean = result.mean(selection)
        logger.info(f"✅ {selection.value}: mean accuracy={mean['accuracy']:.4f}, mean AUC={mean['auc']:.4f}")
    return result


# --- 產出物 ---

def write_fold_artifacts(
    result: CrossValResult, manifest: Manifest, cfg: ExperimentConfig, out_dir: Union[str, Path]
) -> List[Path]:
    """每個 fold 一個目錄: train_log.csv、best_acc.ckpt、best_auc.ckpt、val_manifest.csv"""
    out_dir = Path(out_dir)
    digest = config_hash(cfg)
    written: List[Path] = []
    for fold in result.folds:
        fold_dir = out_dir / f"fold_{fold.fold}"
        written.append(fold.log.save(fold_dir / "train_log.csv", digest))
        written.append(save_checkpoint(fold.best_acc, fold_dir / "best_acc.ckpt"))
        written.append(save_checkpoint(fold.best_auc, fold_dir / "best_auc.ckpt"))
        val = manifest.subset(fold.val_ids)
        absolute = Manifest(
            [ManifestEntry(e.subject_id, e.label, str(val.volume_path(e).resolve())) for e in val],
        )
        written.append(absolute.save(fold_dir / "val_manifest.csv", digest))
    logger.info(f"💾 已寫出 {len(result.folds)} 個 fold 的產出物: {out_dir}")
    return written
