#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
合成雙類別體積資料

HV (0): 每個通道為高斯平滑 (sigma 1) 後再縮放到單位標準差的雜訊。
ADHD (1): 同樣的雜訊，通道 0 加上 separation·blob、通道 1 減去 0.5·separation·blob；
blob 為置中的高斯團 (每軸 sigma = 邊長/4，峰值 1)。separation = 0 時兩類分布完全相同。
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import ArgumentError
from ..tensor.random import RandomSource
from .manifest import DiagnosisLabel, Manifest, ManifestEntry
from .volume_io import save_volume

logger = logging.getLogger(__name__)

SYNTH_CHANNELS = 2
NOISE_SIGMA = 1.0
CHANNEL1_ATTENUATION = 0.5
MANIFEST_NAME = "manifest.csv"
VOLUME_DIR = "volumes"


def centered_blob(extents: Sequence[int]) -> np.ndarray:
    axes = []
    for extent in extents:
        sigma = extent / 4.0
        coords = np.arange(extent, dtype=np.float64) - (extent - 1) / 2.0
        axes.append(np.exp(-0.5 * (coords / sigma) ** 2))
    return axes[0][:, None, None] * axes[1][None, :, None] * axes[2][None, None, :]


def smoothed_noise(extents: Sequence[int], rng: RandomSource) -> np.ndarray:
    """平滑後縮放到單位標準差；場為常數 (例如 1×1×1) 時回傳全 0"""
    noise = gaussian_filter(rng.gaussian(tuple(extents)), sigma=NOISE_SIGMA, mode="wrap")
    std = float(noise.std())
    if std == 0.0:
        return np.zeros_like(noise)
    return noise / std


def synth_volume(
    label: DiagnosisLabel, extents: Sequence[int], rng: RandomSource, separation: float
) -> np.ndarray:
    volume = np.stack([smoothed_noise(extents, rng) for _ in range(SYNTH_CHANNELS)])
    if label is DiagnosisLabel.ADHD:
        blob = centered_blob(extents)
        volume[0] += separation * blob
        volume[1] -= CHANNEL1_ATTENUATION * separation * blob
    return volume.astype(np.float32)


def synth_generate(
    n_per_class: int,
    extents: Sequence[int],
    seed: int,
    separation: float,
    out_dir: Union[str, Path],
) -> Manifest:
    """
    產生 2·n 個受試者 (依序 HV、ADHD 交錯) 並寫出 manifest.csv 與 volumes/*.vol
    同一 seed 產生的目錄內容逐位元相同
    """
    if n_per_class < 1:
        raise ArgumentError(f"每類樣本數必須 ≥ 1: {n_per_class}")
    if separation < 0:
        raise ArgumentError(f"separation 不可為負: {separation}")
    extents = tuple(int(e) for e in extents)
    if len(extents) != 3 or any(e < 1 for e in extents):
        raise ArgumentError(f"空間大小必須是 3 個正整數: {extents}")

    out_dir = Path(out_dir)
    rng = RandomSource(seed)
    entries: List[ManifestEntry] = []
    for index in range(2 * n_per_class):
        label = DiagnosisLabel(index % 2)
        subject_id = f"synth-{index:04d}"
        relative = f"{VOLUME_DIR}/{subject_id}.vol"
        save_volume(synth_volume(label, extents, rng, separation), out_dir / relative)
        entries.append(ManifestEntry(subject_id, label, relative))

    manifest = Manifest(entries, root=out_dir)
    manifest.save(out_dir / MANIFEST_NAME)
    logger.info(
        f"✅ 合成資料完成: {len(entries)} 位受試者, extents={extents}, "
        f"separation={separation}, seed={seed} → {out_dir}"
    )
    return manifest
