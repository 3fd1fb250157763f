#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
二元交叉熵 (logit 形式)
loss = softplus(z) − y·z，以 logaddexp(0, z) 穩定計算；∂loss/∂z = logistic(z) − y
"""

from __future__ import annotations

from typing import Tuple, Union

import numpy as np
from scipy.special import expit

from ..errors import ArgumentError, ShapeError


def _check_labels(labels: np.ndarray) -> None:
    if not np.isin(labels, (0, 1)).all():
        raise ArgumentError(f"標籤必須為 0 或 1: {np.unique(labels).tolist()}")


def bce_with_logits(logit: float, label: Union[int, float]) -> Tuple[float, float]:
    """單一樣本的 (loss, dloss/dlogit)"""
    _check_labels(np.asarray([label]))
    z = float(logit)
    return float(np.logaddexp(0.0, z) - label * z), float(expit(z) - label)


def bce_with_logits_batch(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """批次平均 loss 與每個 logit 的梯度 (已除以批次大小)"""
    if logits.shape != labels.shape or logits.ndim != 1:
        raise ShapeError(f"logits {logits.shape} 與 labels {labels.shape} 必須是等長一維向量")
    _check_labels(labels)
    z = logits.astype(np.float64)
    y = labels.astype(np.float64)
    n = z.shape[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    grad = ((expit(z) - y) / n).astype(logits.dtype)
    return loss, grad
