#!/usr/bin/env python3
"""
測試混淆矩陣、ROC 與 AUC
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import roc_auc_score

from src.data.tables import read_config_hash, read_table
from src.errors import ArgumentError, DegenerateInputError
from src.metrics import (
    accuracy, auc, auc_rank_oracle, confusion, export_roc_csv, roc_auc, roc_curve,
)


def test_worked_example():
    """分數 [0.1, 0.4, 0.35, 0.8]、標籤 [0, 0, 1, 1]：四對中三對一致"""
    scores, labels = [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]
    assert roc_auc(scores, labels) == 0.75
    assert auc_rank_oracle(scores, labels) == 0.75
    curve = roc_curve(scores, labels)
    assert curve.points() == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]


def test_ties_and_orderings():
    labels = [0, 1, 0, 1, 1]
    assert roc_auc([0.3] * 5, labels) == 0.5
    assert roc_auc([0.1, 0.9, 0.2, 0.8, 0.7], labels) == 1.0
    assert roc_auc([0.9, 0.1, 0.8, 0.2, 0.3], labels) == 0.0
    # 同分區塊形成對角線段
    curve = roc_curve([0.5, 0.5, 0.2], [1, 0, 0])
    assert curve.points() == [(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]
    assert auc(curve) == 0.75


def test_curve_endpoints_and_thresholds():
    rng = np.random.default_rng(0)
    scores = rng.random(30)
    labels = np.array([0, 1] * 15)
    curve = roc_curve(scores, labels)
    assert curve.points()[0] == (0.0, 0.0)
    assert curve.points()[-1] == (1.0, 1.0)
    assert np.isinf(curve.thresholds[0])
    assert np.all(np.diff(curve.thresholds) < 0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)


def test_threshold_is_inclusive():
    """score ≥ τ 判為陽性"""
    cm = confusion([0.5, 0.49, 0.7, 0.1], [1, 1, 0, 0], threshold=0.5)
    assert cm.to_dict() == {"tp": 1, "tn": 1, "fp": 1, "fn": 1}
    assert accuracy(cm) == 0.5
    assert cm.tpr == 0.5 and cm.fpr == 0.5


def test_degenerate_and_invalid_inputs():
    with pytest.raises(DegenerateInputError):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(DegenerateInputError):
        auc_rank_oracle([0.1, 0.2], [0, 0])
    with pytest.raises(ArgumentError):
        roc_auc([0.1, 0.2], [0, 2])
    with pytest.raises(ArgumentError):
        confusion([0.1, 0.2, 0.3], [0, 1])
    with pytest.raises(ArgumentError):
        accuracy(confusion([], []))


def test_auc_matches_rank_oracle_and_sklearn_on_random_sets():
    """1000 組隨機資料 (含刻意量化造成的同分)"""
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        n = int(rng.integers(2, 60))
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 0, 1
        scores = rng.random(n)
        if trial % 2:
            scores = np.round(scores, 1)
        value = roc_auc(scores, labels)
        assert value == pytest.approx(auc_rank_oracle(scores, labels), abs=1e-12)
        assert value == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)


@given(
    st.lists(st.integers(min_value=0, max_value=20), min_size=4, max_size=40),
    st.integers(min_value=0, max_value=2 ** 32 - 1),
)
def test_auc_is_invariant_to_monotone_transforms(raw, seed):
    labels = np.random.default_rng(seed).integers(0, 2, size=len(raw))
    labels[0], labels[1] = 0, 1
    scores = np.array(raw, dtype=np.float64)
    assert roc_auc(scores, labels) == roc_auc(np.exp(scores / 7.0) + 3.0, labels)


@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=4, max_size=40),
    st.integers(min_value=0, max_value=2 ** 32 - 1),
)
def test_reversing_labels_maps_auc_to_complement(scores, seed):
    labels = np.random.default_rng(seed).integers(0, 2, size=len(scores))
    labels[0], labels[1] = 0, 1
    assert roc_auc(scores, 1 - labels) == pytest.approx(1.0 - roc_auc(scores, labels), abs=1e-12)


def test_export_roc_csv(tmp_path):
    curve = roc_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    path = export_roc_csv(curve, tmp_path / "roc.csv", config_hash="cafe")
    assert read_config_hash(path) == "cafe"
    frame = read_table(path)
    assert list(frame.columns) == ["threshold", "fpr", "tpr"]
    assert len(frame) == 5
    assert frame["tpr"].iloc[-1] == 1.0
