#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Backbone 架構定義
提供 3D ResNet 預設架構 (resnet50-3d / tiny) 與不配置權重的卷積清單走訪
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

from ..errors import ConfigurationError
from ..layers.conv3d import Triple, conv_output_extents

STEM_POOL_KERNEL = 3
STEM_POOL_STRIDE = 2
STEM_POOL_PADDING = 1


# --- 枚舉類型 ---

class BackbonePreset(Enum):
    """架構預設"""
    RESNET50_3D = "resnet50-3d"
    TINY = "tiny"


# --- 架構規格 ---

@dataclass(frozen=True)
class StemSpec:
    """Stem 卷積 (kernel³、stride、寬度) 與是否接 3³ stride-2 max pooling"""
    kernel: int
    stride: int
    width: int
    max_pool: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"kernel": self.kernel, "stride": self.stride, "width": self.width, "max_pool": self.max_pool}


@dataclass(frozen=True)
class StageSpec:
    """一個 stage：bottleneck block 數、bottleneck 寬度、輸出寬度、第一個 block 的 stride"""
    blocks: int
    bottleneck_width: int
    out_width: int
    stride: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "blocks": self.blocks,
            "bottleneck_width": self.bottleneck_width,
            "out_width": self.out_width,
            "stride": self.stride,
        }


@dataclass(frozen=True)
class BackboneConfig:
    """3D ResNet backbone 設定"""
    preset: str
    stem: StemSpec
    stages: Tuple[StageSpec, ...]
    in_channels: int = 2
    conv_bias: bool = False
    norm_eps: float = 1e-5

    def __post_init__(self) -> None:
        widths = [self.in_channels, self.stem.width] + [
            w for s in self.stages for w in (s.bottleneck_width, s.out_width)
        ]
        if not self.stages or any(w < 1 for w in widths):
            raise ConfigurationError(f"架構寬度必須皆為正且至少一個 stage: {self.preset}")
        if any(s.blocks < 1 or s.stride < 1 for s in self.stages):
            raise ConfigurationError(f"stage 的 block 數與 stride 必須為正: {self.preset}")

    @property
    def feature_dim(self) -> int:
        """特徵維度 = 最後一個 stage 的輸出寬度"""
        return self.stages[-1].out_width

    @classmethod
    def from_preset(cls, preset: BackbonePreset | str, in_channels: int = 2) -> BackboneConfig:
        preset = BackbonePreset(preset)
        if preset is BackbonePreset.RESNET50_3D:
            expansion = 4
            stem = StemSpec(kernel=7, stride=2, width=64, max_pool=True)
            layout = ((3, 64, 1), (4, 128, 2), (6, 256, 2), (3, 512, 2))
        else:
            expansion = 2
            stem = StemSpec(kernel=3, stride=2, width=8, max_pool=False)
            layout = ((1, 8, 1), (1, 16, 2))
        stages = tuple(
            StageSpec(blocks=n, bottleneck_width=w, out_width=w * expansion, stride=s)
            for n, w, s in layout
        )
        return cls(preset=preset.value, stem=stem, stages=stages, in_channels=in_channels)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "preset": self.preset,
            "in_channels": self.in_channels,
            "stem": self.stem.to_dict(),
            "stages": [s.to_dict() for s in self.stages],
            "conv_bias": self.conv_bias,
            "norm_eps": self.norm_eps,
            "feature_dim": self.feature_dim,
        }


# --- 卷積清單走訪 ---

@dataclass(frozen=True)
class ConvSpec:
    """架構中單一卷積的描述 (名稱、通道、kernel、stride、padding、輸入/輸出空間大小)"""
    name: str
    in_channels: int
    out_channels: int
    kernel: int
    stride: int
    padding: int
    in_extents: Optional[Triple] = None
    out_extents: Optional[Triple] = None

    @property
    def output_voxels(self) -> int:
        if self.out_extents is None:
            raise ConfigurationError(f"{self.name} 未指定輸入空間大小")
        d, h, w = self.out_extents
        return d * h * w


@dataclass(frozen=True)
class BlockLayout:
    """一個 bottleneck block 的卷積規格"""
    name: str
    conv1: ConvSpec
    conv2: ConvSpec
    conv3: ConvSpec
    downsample: Optional[ConvSpec] = None

    def convs(self) -> Iterator[ConvSpec]:
        yield self.conv1
        yield self.conv2
        yield self.conv3
        if self.downsample is not None:
            yield self.downsample


@dataclass(frozen=True)
class BackboneLayout:
    """完整 backbone 的卷積規格 (依前向順序)"""
    stem: ConvSpec
    blocks: Tuple[BlockLayout, ...] = field(default_factory=tuple)
    feature_extents: Optional[Triple] = None

    def convs(self) -> Iterator[ConvSpec]:
        yield self.stem
        for block in self.blocks:
            yield from block.convs()


def _spec(name: str, c_in: int, c_out: int, k: int, stride: int, extents: Optional[Triple]) -> ConvSpec:
    padding = k // 2
    if extents is None:
        return ConvSpec(name, c_in, c_out, k, stride, padding)
    out = conv_output_extents(extents, (k,) * 3, (stride,) * 3, (padding,) * 3)
    if any(o < 1 for o in out):
        raise ConfigurationError(f"輸入大小 {extents} 在 {name} 處縮到 0")
    return ConvSpec(name, c_in, c_out, k, stride, padding, extents, out)


def backbone_layout(
    config: BackboneConfig, input_extents: Optional[Sequence[int]] = None
) -> BackboneLayout:
    """
    依前向順序推導每個卷積的規格，不配置任何權重
    給定 input_extents 時同時推導每層的空間大小
    """
    extents: Optional[Triple] = None
    if input_extents is not None:
        extents = tuple(int(e) for e in input_extents)  # type: ignore[assignment]
        if len(extents) != 3 or any(e < 1 for e in extents):
            raise ConfigurationError(f"輸入空間大小必須是 3 個正整數: {input_extents}")

    stem = _spec("backbone.stem.conv", config.in_channels, config.stem.width,
                 config.stem.kernel, config.stem.stride, extents)
    extents = stem.out_extents
    if config.stem.max_pool and extents is not None:
        extents = conv_output_extents(
            extents, (STEM_POOL_KERNEL,) * 3, (STEM_POOL_STRIDE,) * 3, (STEM_POOL_PADDING,) * 3
        )

    blocks = []
    channels = config.stem.width
    for stage_index, stage in enumerate(config.stages, start=1):
        for block_index in range(stage.blocks):
            name = f"backbone.layer{stage_index}.{block_index}"
            stride = stage.stride if block_index == 0 else 1
            conv1 = _spec(f"{name}.conv1", channels, stage.bottleneck_width, 1, 1, extents)
            conv2 = _spec(f"{name}.conv2", stage.bottleneck_width, stage.bottleneck_width, 3, stride, extents)
            conv3 = _spec(f"{name}.conv3", stage.bottleneck_width, stage.out_width, 1, 1, conv2.out_extents)
            downsample = None
            if stride != 1 or channels != stage.out_width:
                downsample = _spec(f"{name}.downsample.conv", channels, stage.out_width, 1, stride, extents)
            blocks.append(BlockLayout(name, conv1, conv2, conv3, downsample))
            channels = stage.out_width
            extents = conv3.out_extents

    return BackboneLayout(stem=stem, blocks=tuple(blocks), feature_extents=extents)


def iter_conv_specs(
    config: BackboneConfig, input_extents: Optional[Sequence[int]] = None
) -> Iterator[ConvSpec]:
    yield from backbone_layout(config, input_extents).convs()


def is_excluded(name: str, patterns: Sequence[str]) -> bool:
    """卷積名稱是否符合任一 fnmatch 排除樣式"""
    return any(fnmatch.fnmatchcase(name, p) for p in patterns)
