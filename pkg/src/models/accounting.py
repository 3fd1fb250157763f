#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
參數量與 FLOPs 統計

依架構規格逐一走訪卷積計算，不配置任何權重 (resnet50-3d 也能即時計算)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

from ..errors import ConfigurationError
from ..lora.adapter import lora_param_count
from .architecture import BackboneConfig, backbone_layout, is_excluded, iter_conv_specs
from .classifier import HEAD_HIDDEN_UNITS, AdhdClassifier

# 對照用的已發表參考值 (百萬參數 / TFLOPs)
REFERENCE_LORA_TOTAL_M = 1.64
REFERENCE_FULL_FINETUNE_M = 185.57
REFERENCE_TFLOPS = 0.41


@dataclass
class ParamCountReport:
    """可訓練參數總數與逐層明細 (adapter 以卷積名稱、head 以 head.fc1 / head.fc2 為鍵)"""
    total: int
    breakdown: Dict[str, int] = field(default_factory=dict)

    @property
    def lora_total(self) -> int:
        return sum(v for k, v in self.breakdown.items() if not k.startswith("head."))

    @property
    def head_total(self) -> int:
        return sum(v for k, v in self.breakdown.items() if k.startswith("head."))

    @property
    def millions(self) -> float:
        return self.total / 1e6

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total": self.total,
            "lora_total": self.lora_total,
            "head_total": self.head_total,
            "breakdown": dict(self.breakdown),
        }


def head_param_count(feature_dim: int, hidden_units: int = HEAD_HIDDEN_UNITS) -> Dict[str, int]:
    return {
        "head.fc1": feature_dim * hidden_units + hidden_units,
        "head.fc2": hidden_units + 1,
    }


def trainable_param_count(m: AdhdClassifier) -> ParamCountReport:
    """只統計登錄表中的參數"""
    breakdown: Dict[str, int] = {}
    for name, tensor in m.trainable_parameters().items():
        layer = name.rsplit(".", 1)[0]
        breakdown[layer] = breakdown.get(layer, 0) + int(tensor.size)
    return ParamCountReport(total=sum(breakdown.values()), breakdown=breakdown)


def param_count_from_config(
    config: BackboneConfig,
    r: Optional[int] = 4,
    exclude: Sequence[str] = (),
    hidden_units: int = HEAD_HIDDEN_UNITS,
) -> ParamCountReport:
    """
    以公式加總 r·(d_out + d_in·k³) 與 head 參數
    r 為 None 時只有 head
    """
    breakdown: Dict[str, int] = {}
    if r is not None:
        for spec in iter_conv_specs(config):
            if is_excluded(spec.name, exclude):
                continue
            breakdown[spec.name] = lora_param_count(spec.out_channels, spec.in_channels, spec.kernel, r)
    breakdown.update(head_param_count(config.feature_dim, hidden_units))
    return ParamCountReport(total=sum(breakdown.values()), breakdown=breakdown)


def full_finetune_param_count(config: BackboneConfig, hidden_units: int = HEAD_HIDDEN_UNITS) -> int:
    """全部微調時的可訓練參數：卷積權重 (與 bias)、正規化 scale/shift、head"""
    total = 0
    layout = backbone_layout(config)
    for spec in layout.convs():
        total += spec.out_channels * spec.in_channels * spec.kernel ** 3
        if config.conv_bias:
            total += spec.out_channels
        # 每個卷積後面都接一個正規化層
        total += 2 * spec.out_channels
    return total + sum(head_param_count(config.feature_dim, hidden_units).values())


@dataclass
class FlopsReport:
    """單一樣本的 multiply-accumulate 數；flops = 2 × MACs"""
    input_extents: Sequence[int]
    macs: int
    per_layer: Dict[str, int] = field(default_factory=dict)

    @property
    def flops(self) -> int:
        return 2 * self.macs

    @property
    def gmacs(self) -> float:
        return self.macs / 1e9

    @property
    def tflops(self) -> float:
        return self.flops / 1e12

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input_extents": list(self.input_extents),
            "macs": self.macs,
            "flops": self.flops,
            "per_layer": dict(self.per_layer),
        }


def conv_macs(d_out: int, d_in: int, k: int, output_voxels: int) -> int:
    return d_out * d_in * k ** 3 * output_voxels


def flops_estimate(
    config: BackboneConfig,
    input_extents: Sequence[int],
    hidden_units: int = HEAD_HIDDEN_UNITS,
) -> FlopsReport:
    """
    逐卷積 d_out·d_in·k³·輸出體素數 再加上 head 的 MACs
    LoRA 合併後推論成本與凍結模型相同，因此不另計 adapter
    """
    if len(input_extents) != 3:
        raise ConfigurationError(f"輸入空間大小必須是 3 個整數: {input_extents}")
    per_layer: Dict[str, int] = {}
    for spec in iter_conv_specs(config, input_extents):
        per_layer[spec.name] = conv_macs(spec.out_channels, spec.in_channels, spec.kernel, spec.output_voxels)
    per_layer["head.fc1"] = config.feature_dim * hidden_units
    per_layer["head.fc2"] = hidden_units
    return FlopsReport(
        input_extents=tuple(int(e) for e in input_extents),
        macs=sum(per_layer.values()),
        per_layer=per_layer,
    )
