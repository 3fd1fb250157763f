#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
VOL1 體積檔

版面 (little-endian):
    magic "VOL1" | c: u32 | D, H, W: u32 | dtype code: u8 | c·D·H·W 個元素 ([c, D, H, W] row-major)
dtype code 0 = float32、1 = float64。通道 0 為 FA、通道 1 為 MD。
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import DimensionError, FormatError
from ..tensor.core import DType

logger = logging.getLogger(__name__)

VOLUME_MAGIC = b"VOL1"
_HEADER = struct.Struct("<4sIIIIB")


def encode_volume(volume: np.ndarray) -> bytes:
    if volume.ndim != 4 or any(e < 1 for e in volume.shape):
        raise DimensionError(f"體積必須是 [c, D, H, W] 且各維度 ≥ 1: {volume.shape}")
    dtype = DType.from_numpy(volume.dtype)
    header = _HEADER.pack(VOLUME_MAGIC, *volume.shape, dtype.code)
    payload = np.ascontiguousarray(volume, dtype=dtype.numpy.newbyteorder("<")).tobytes()
    return header + payload


def decode_volume(buffer: bytes) -> np.ndarray:
    """解析 VOL1 內容；任何錯誤都以 FormatError 回報位元組位置"""
    if len(buffer) < 4 or buffer[:4] != VOLUME_MAGIC:
        raise FormatError(f"magic 不是 {VOLUME_MAGIC!r}: {bytes(buffer[:4])!r}", offset=0)
    if len(buffer) < _HEADER.size:
        raise FormatError(f"標頭被截斷 (需要 {_HEADER.size} bytes，實際 {len(buffer)})", offset=len(buffer))
    _, c, d, h, w, code = _HEADER.unpack_from(buffer, 0)
    for index, extent in enumerate((c, d, h, w)):
        if extent < 1:
            raise FormatError(f"維度必須 ≥ 1: {(c, d, h, w)}", offset=4 + 4 * index)
    try:
        dtype = DType.from_code(code)
    except ValueError:
        raise FormatError(f"未知的 dtype code: {code}", offset=_HEADER.size - 1) from None

    count = c * d * h * w
    expected = _HEADER.size + count * dtype.numpy.itemsize
    if len(buffer) < expected:
        raise FormatError(f"資料被截斷 (需要 {expected} bytes，實際 {len(buffer)})", offset=len(buffer))
    if len(buffer) > expected:
        raise FormatError(f"資料後有多餘的 {len(buffer) - expected} bytes", offset=expected)
    data = np.frombuffer(buffer, dtype=dtype.numpy.newbyteorder("<"), count=count, offset=_HEADER.size)
    return data.astype(dtype.numpy).reshape(c, d, h, w)


def save_volume(volume: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_volume(volume))
    logger.debug(f"💾 寫出體積 {volume.shape}: {path}")
    return path


def load_volume(path: Union[str, Path]) -> np.ndarray:
    """讀取 VOL1 檔，回傳 [c, D, H, W]"""
    return decode_volume(Path(path).read_bytes())
