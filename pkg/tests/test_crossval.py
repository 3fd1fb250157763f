#!/usr/bin/env python3
"""
測試交叉驗證：凍結 backbone 不變、checkpoint 選擇、可重現性與合成資料上的學習效果
"""

import json

import numpy as np
import pytest

from src.config import load_config, parse_config
from src.data import Manifest, VolumeRepository, synth_generate
from src.training import (
    Checkpoint, SelectionMetric, TrainLog, evaluate_scores, load_checkpoint, restore_model,
    run_crossval, save_checkpoint, score_metrics, shared_backbone_weights, tensor_digest,
    write_fold_artifacts,
)
from tests.conftest import tiny_config_dict


def test_frozen_backbone_is_shared_and_untouched(synth_manifest):
    cfg = parse_config(tiny_config_dict())
    result = run_crossval(synth_manifest, cfg)
    assert result.backbone_digest == tensor_digest(shared_backbone_weights(cfg))
    assert result.final_backbone_digests == [result.backbone_digest] * cfg.train.folds
    for fold in result.folds:
        assert fold.best_acc.metadata["backbone_digest"] == result.backbone_digest
        assert fold.best_auc.metadata["backbone"] == {"source": "seed", "seed": cfg.train.seed}


def test_every_subject_is_validated_exactly_once(synth_manifest):
    cfg = parse_config(tiny_config_dict())
    result = run_crossval(synth_manifest, cfg)
    validated = [s for fold in result.folds for s in fold.val_ids]
    assert sorted(validated) == sorted(synth_manifest.subject_ids)
    assert [fold.fold for fold in result.folds] == [0, 1]


def test_checkpoints_reproduce_logged_metrics(synth_manifest, tmp_path):
    """從檔案重新載入的 checkpoint 在該 fold 驗證集上重現紀錄中的指標"""
    cfg = parse_config(tiny_config_dict())
    result = run_crossval(synth_manifest, cfg)
    write_fold_artifacts(result, synth_manifest, cfg, tmp_path)

    repository_data = {}
    for fold in result.folds:
        fold_dir = tmp_path / f"fold_{fold.fold}"
        log = TrainLog.load(fold_dir / "train_log.csv").to_frame()
        val_manifest = Manifest.load(fold_dir / "val_manifest.csv")
        assert val_manifest.subject_ids == fold.val_ids

        for selection in SelectionMetric:
            checkpoint = load_checkpoint(fold_dir / f"{selection.value}.ckpt")
            column = "val_acc" if selection is SelectionMetric.ACCURACY else "val_auc"
            assert checkpoint.metadata[column] == log[column].max()
            model = restore_model(checkpoint)

            data = repository_data.setdefault(
                fold.fold, VolumeRepository(val_manifest, cfg.model.input_extents).volume_set()
            )
            acc, auc = score_metrics(evaluate_scores(model, data.x), data.labels, cfg.train.threshold)
            assert acc == checkpoint.metadata["val_acc"]
            assert auc == checkpoint.metadata["val_auc"]


def test_artifacts_are_byte_identical_across_runs(synth_manifest, tmp_path):
    cfg = parse_config(tiny_config_dict())
    for name in ("a", "b"):
        write_fold_artifacts(run_crossval(synth_manifest, cfg), synth_manifest, cfg, tmp_path / name)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 2 * 4
    for relative in files:
        assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()


def test_parallel_folds_match_sequential(synth_manifest):
    cfg = parse_config(tiny_config_dict())
    sequential = run_crossval(synth_manifest, cfg, jobs=1)
    parallel = run_crossval(synth_manifest, cfg, jobs=2)
    assert parallel.final_backbone_digests == sequential.final_backbone_digests
    for a, b in zip(sequential.folds, parallel.folds):
        assert a.log.to_frame().equals(b.log.to_frame())
        assert tensor_digest(a.best_auc.tensors) == tensor_digest(b.best_auc.tensors)
        assert a.best_auc.metadata == b.best_auc.metadata


def test_different_seed_changes_backbone(synth_manifest):
    a = tensor_digest(shared_backbone_weights(parse_config(tiny_config_dict(seed=0))))
    b = tensor_digest(shared_backbone_weights(parse_config(tiny_config_dict(seed=1))))
    assert a != b


def test_weights_path_is_relative_to_config_file(tmp_path, monkeypatch):
    """model.weights 的相對路徑以設定檔所在目錄為基準，與目前工作目錄無關"""
    source = shared_backbone_weights(parse_config(tiny_config_dict(seed=9)))
    config_dir = tmp_path / "configs"
    save_checkpoint(Checkpoint(tensors=source, metadata={}), config_dir / "backbone.ckpt")
    data = tiny_config_dict()
    data["model"]["weights"] = "backbone.ckpt"
    (config_dir / "run.json").write_text(json.dumps(data), encoding="utf-8")

    elsewhere = tmp_path / "elsewhere"
    elsewhere.mkdir()
    monkeypatch.chdir(elsewhere)
    cfg = load_config(config_dir / "run.json")
    assert tensor_digest(shared_backbone_weights(cfg)) == tensor_digest(source)


# --- 合成資料上的學習效果 ---

@pytest.mark.slow
def test_separable_synthetic_data_is_learned(tmp_path):
    """separation 2、每類 50、16³、5 folds：平均 AUC ≥ 0.9、accuracy ≥ 0.8"""
    manifest = synth_generate(50, (16, 16, 16), seed=0, separation=2.0, out_dir=tmp_path)
    cfg = parse_config({
        "model": {"preset": "tiny", "input_extents": [16, 16, 16]},
        "train": {"epochs": 15, "folds": 5, "lr_lora": 1e-3, "lr_head": 1e-3},
    })
    result = run_crossval(manifest, cfg)
    mean = result.mean(SelectionMetric.AUC)
    assert mean["auc"] >= 0.9
    assert result.mean(SelectionMetric.ACCURACY)["accuracy"] >= 0.8


@pytest.mark.slow
def test_indistinguishable_classes_stay_near_chance(tmp_path):
    """separation 0：回報的平均 AUC 與最後一個 epoch 的驗證 AUC 平均都落在 [0.4, 0.6]"""
    manifest = synth_generate(100, (16, 16, 16), seed=1, separation=0.0, out_dir=tmp_path)
    cfg = parse_config({
        "model": {"preset": "tiny", "input_extents": [16, 16, 16]},
        "train": {"epochs": 5, "folds": 5, "lr_lora": 1e-3, "lr_head": 1e-3},
    })
    result = run_crossval(manifest, cfg)
    last_epoch_auc = np.mean([fold.log.rows[-1].val_auc for fold in result.folds])
    assert 0.4 <= last_epoch_auc <= 0.6
    assert 0.4 <= result.mean(SelectionMetric.AUC)["auc"] <= 0.6
