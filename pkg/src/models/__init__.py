#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
3D LoRA 微調引擎 - 模型包
架構預設、凍結 backbone、分類器與參數 / FLOPs 統計
"""

from .architecture import (
    BackbonePreset, BackboneConfig, StemSpec, StageSpec, ConvSpec,
    backbone_layout, iter_conv_specs, is_excluded,
)
from .backbone import Backbone3d, build_backbone
from .classifier import (
    AdhdClassifier, MlpHead, build_classifier, build_head, predict_score,
    strip_adapters, merge_adapters, HEAD_HIDDEN_UNITS, HEAD_DROPOUT,
)
from .accounting import (
    ParamCountReport, FlopsReport, trainable_param_count, param_count_from_config,
    full_finetune_param_count, head_param_count, conv_macs, flops_estimate,
    REFERENCE_LORA_TOTAL_M, REFERENCE_FULL_FINETUNE_M, REFERENCE_TFLOPS,
)

__all__ = [
    'BackbonePreset', 'BackboneConfig', 'StemSpec', 'StageSpec', 'ConvSpec',
    'backbone_layout', 'iter_conv_specs', 'is_excluded',
    'Backbone3d', 'build_backbone',
    'AdhdClassifier', 'MlpHead', 'build_classifier', 'build_head', 'predict_score',
    'strip_adapters', 'merge_adapters', 'HEAD_HIDDEN_UNITS', 'HEAD_DROPOUT',
    'ParamCountReport', 'FlopsReport', 'trainable_param_count', 'param_count_from_config',
    'full_finetune_param_count', 'head_param_count', 'conv_macs', 'flops_estimate',
    'REFERENCE_LORA_TOTAL_M', 'REFERENCE_FULL_FINETUNE_M', 'REFERENCE_TFLOPS',
]
