#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
L3CK checkpoint 格式 (little-endian)

    magic "L3CK" (4 bytes)
    version: u32
    metadata: u32 長度 + UTF-8 JSON (sort_keys；NaN 寫成 null)
    tensor count: u32
    每個張量 (依名稱字典序):
        名稱長度 u16 + UTF-8 名稱 | rank u8 | extents u64 × rank | dtype code u8 | 原始資料

存檔 → 讀檔 → 存檔 的位元組完全相同。
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar, Dict, Mapping, Tuple, Union

import numpy as np

from ..errors import FormatError
from ..tensor.core import DType

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"L3CK"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    """具名張量表與訓練 metadata (epoch、fold、seed、config hash、驗證指標...)"""
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def adapter_tensors(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if ".lora_" in k}

    @property
    def head_tensors(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith("head.")}

    @property
    def backbone_tensors(self) -> Dict[str, np.ndarray]:
        return {
            k: v for k, v in self.tensors.items()
            if k.startswith("backbone.") and ".lora_" not in k
        }

    @property
    def has_backbone(self) -> bool:
        return bool(self.backbone_tensors)


def tensor_digest(tensors: Mapping[str, np.ndarray]) -> str:
    """依名稱排序的 (名稱, dtype, 形狀, 原始位元組) SHA-256；用於確認凍結權重未被改動"""
    digest = hashlib.sha256()
    for name in sorted(tensors):
        tensor = np.ascontiguousarray(tensors[name])
        digest.update(f"{name}|{tensor.dtype.str}|{tensor.shape}".encode("utf-8"))
        digest.update(tensor.tobytes())
    return digest.hexdigest()


class _Reader:
    """帶位置追蹤的緩衝區讀取器；越界時回報 FormatError"""

    U8: ClassVar[struct.Struct] = struct.Struct("<B")
    U16: ClassVar[struct.Struct] = struct.Struct("<H")
    U32: ClassVar[struct.Struct] = struct.Struct("<I")
    U64: ClassVar[struct.Struct] = struct.Struct("<Q")

    def __init__(self, buffer: bytes):
        self.buffer = memoryview(buffer)
        self.offset = 0

    def take(self, size: int, what: str) -> memoryview:
        end = self.offset + size
        if size < 0 or end > len(self.buffer):
            raise FormatError(
                f"讀取 {what} 時資料被截斷 (需要 {size} bytes，剩 {len(self.buffer) - self.offset})",
                offset=self.offset,
            )
        chunk = self.buffer[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: struct.Struct, what: str) -> int:
        return int(fmt.unpack(self.take(fmt.size, what))[0])


# 驗證指標在 JSON 中以 null 表示 NaN (單一類別的 fold 沒有 AUC)
METRIC_KEYS = ("val_acc", "val_auc")


def _finite_or_null(value: Any) -> Any:
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite_or_null(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_null(v) for v in value]
    return value


def _metadata_bytes(metadata: Mapping[str, Any]) -> bytes:
    text = json.dumps(
        _finite_or_null(dict(metadata)),
        sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False,
    )
    return text.encode("utf-8")


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    parts = [CHECKPOINT_MAGIC, _Reader.U32.pack(CHECKPOINT_VERSION)]
    meta = _metadata_bytes(checkpoint.metadata)
    parts += [_Reader.U32.pack(len(meta)), meta, _Reader.U32.pack(len(checkpoint.tensors))]
    for name in sorted(checkpoint.tensors):
        tensor = checkpoint.tensors[name]
        dtype = DType.from_numpy(tensor.dtype)
        encoded = name.encode("utf-8")
        parts.append(_Reader.U16.pack(len(encoded)) + encoded)
        parts.append(_Reader.U8.pack(tensor.ndim))
        parts += [_Reader.U64.pack(e) for e in tensor.shape]
        parts.append(_Reader.U8.pack(dtype.code))
        parts.append(np.ascontiguousarray(tensor, dtype=dtype.numpy.newbyteorder("<")).tobytes())
    return b"".join(parts)


def _decode_tensor(reader: _Reader) -> Tuple[str, np.ndarray]:
    name_offset = reader.offset
    name_length = reader.unpack(_Reader.U16, "張量名稱長度")
    try:
        name = bytes(reader.take(name_length, "張量名稱")).decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("張量名稱不是合法 UTF-8", offset=name_offset) from None
    rank = reader.unpack(_Reader.U8, f"{name} 的 rank")
    shape = tuple(reader.unpack(_Reader.U64, f"{name} 的 extents") for _ in range(rank))
    code_offset = reader.offset
    code = reader.unpack(_Reader.U8, f"{name} 的 dtype")
    try:
        dtype = DType.from_code(code)
    except ValueError:
        raise FormatError(f"{name}: 未知的 dtype code {code}", offset=code_offset) from None
    count = int(np.prod(shape)) if shape else 1
    raw = reader.take(count * dtype.numpy.itemsize, f"{name} 的資料")
    data = np.frombuffer(raw, dtype=dtype.numpy.newbyteorder("<"), count=count)
    return name, data.astype(dtype.numpy).reshape(shape)


def decode_checkpoint(buffer: bytes) -> Checkpoint:
    reader = _Reader(buffer)
    magic = bytes(reader.take(4, "magic"))
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"magic 不是 {CHECKPOINT_MAGIC!r}: {magic!r}", offset=0)
    version = reader.unpack(_Reader.U32, "version")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"不支援的版本 {version} (支援 {CHECKPOINT_VERSION})", offset=4)

    meta_offset = reader.offset
    meta_length = reader.unpack(_Reader.U32, "metadata 長度")
    try:
        metadata = json.loads(bytes(reader.take(meta_length, "metadata")).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError("metadata 不是合法的 UTF-8 JSON", offset=meta_offset + 4) from None
    if not isinstance(metadata, dict):
        raise FormatError("metadata 必須是 JSON 物件", offset=meta_offset + 4)
    for key in METRIC_KEYS:
        if key in metadata and metadata[key] is None:
            metadata[key] = float("nan")

    count = reader.unpack(_Reader.U32, "張量數量")
    tensors: Dict[str, np.ndarray] = {}
    previous = None
    for _ in range(count):
        entry_offset = reader.offset
        name, tensor = _decode_tensor(reader)
        if previous is not None and name <= previous:
            raise FormatError(f"張量名稱未依字典序排列或重複: {name}", offset=entry_offset)
        tensors[name] = tensor
        previous = name
    if reader.offset != len(reader.buffer):
        raise FormatError(f"檔尾有多餘的 {len(reader.buffer) - reader.offset} bytes", offset=reader.offset)
    return Checkpoint(tensors=tensors, metadata=metadata)


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    logger.debug(f"💾 checkpoint 已寫出 ({len(checkpoint.tensors)} 個張量): {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    checkpoint = decode_checkpoint(Path(path).read_bytes())
    logger.debug(f"📊 載入 checkpoint ({len(checkpoint.tensors)} 個張量): {path}")
    return checkpoint
