#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AdamW (decoupled weight decay)，每個參數群組有自己的學習率與 weight decay

    m ← β₁m + (1−β₁)g
    v ← β₂v + (1−β₂)g²
    m̂ = m/(1−β₁ᵗ),  v̂ = v/(1−β₂ᵗ)
    θ ← θ − lr·m̂/(√v̂ + ε) − lr·wd·θ

參數陣列原地更新，因此模型直接看到新值。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

from ..errors import ArgumentError, RegistryError

logger = logging.getLogger(__name__)

LORA_MARKER = ".lora_"
HEAD_PREFIX = "head."


@dataclass(frozen=True)
class ParamGroup:
    name: str
    params: Sequence[str]
    lr: float
    weight_decay: float = 0.0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ArgumentError(f"{self.name}: 學習率必須為正: {self.lr}")
        if self.weight_decay < 0:
            raise ArgumentError(f"{self.name}: weight decay 不可為負: {self.weight_decay}")


@dataclass
class AdamWState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def default_param_groups(
    names: Sequence[str], lr_lora: float = 1e-4, lr_head: float = 1e-5, weight_decay: float = 1e-4
) -> List[ParamGroup]:
    """LoRA (A/B) 與 head 兩個群組；沒有成員的群組省略"""
    lora = [n for n in names if LORA_MARKER in n]
    head = [n for n in names if n.startswith(HEAD_PREFIX)]
    other = sorted(set(names) - set(lora) - set(head))
    if other:
        raise RegistryError(f"無法歸類的可訓練參數: {other[0]}")
    groups = []
    if lora:
        groups.append(ParamGroup("lora", lora, lr_lora, weight_decay))
    if head:
        groups.append(ParamGroup("head", head, lr_head, weight_decay))
    return groups


def _check_registry(params: Mapping[str, np.ndarray], groups: Sequence[ParamGroup], grads: Mapping[str, np.ndarray]) -> None:
    missing = sorted(set(params) - set(grads))
    if missing:
        raise RegistryError(f"缺少參數梯度: {missing[0]}")
    extra = sorted(set(grads) - set(params))
    if extra:
        raise RegistryError(f"梯度不屬於可訓練參數: {extra[0]}")
    members = [n for g in groups for n in g.params]
    if len(members) != len(set(members)) or set(members) != set(params):
        raise RegistryError("參數群組必須恰好分割可訓練參數登錄表")
    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise RegistryError(f"{name}: 梯度形狀 {grad.shape} 與參數 {params[name].shape} 不符")


def adamw_step(
    params: Mapping[str, np.ndarray],
    groups: Sequence[ParamGroup],
    state: AdamWState,
    grads: Mapping[str, np.ndarray],
) -> None:
    """一次 AdamW 更新 (原地)；t 只加一"""
    _check_registry(params, groups, grads)
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for group in groups:
        for name in group.params:
            theta = params[name]
            g = grads[name].astype(theta.dtype, copy=False)
            m = state.m.setdefault(name, np.zeros_like(theta))
            v = state.v.setdefault(name, np.zeros_like(theta))
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            m_hat = m / correction1
            v_hat = v / correction2
            update = group.lr * m_hat / (np.sqrt(v_hat) + state.eps) + group.lr * group.weight_decay * theta
            theta -= update.astype(theta.dtype, copy=False)


class AdamW:
    """綁定參數登錄表的 AdamW"""

    def __init__(
        self,
        params: Mapping[str, np.ndarray],
        groups: Sequence[ParamGroup],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.groups = list(groups)
        self.state = AdamWState(beta1=beta1, beta2=beta2, eps=eps)
        logger.debug(
            "🔧 AdamW 群組: " + ", ".join(f"{g.name}({len(g.params)}, lr={g.lr}, wd={g.weight_decay})" for g in self.groups)
        )

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        adamw_step(self.params, self.groups, self.state, grads)
