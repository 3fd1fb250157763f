#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
資料集索引 (manifest)
CSV 欄位 subject_id,label,path；相對路徑以 manifest 所在目錄為基準
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Union

import pandas as pd

from ..errors import ManifestError
from .tables import read_config_hash, read_table, write_table

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["subject_id", "label", "path"]


class DiagnosisLabel(IntEnum):
    """診斷標籤"""
    HV = 0
    ADHD = 1


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    label: DiagnosisLabel
    path: str

    def resolve(self, root: Optional[Path]) -> Path:
        p = Path(self.path)
        return p if p.is_absolute() or root is None else root / p


@dataclass
class Manifest:
    """受試者清單；subject_id 唯一、標籤為二元"""
    entries: List[ManifestEntry]
    root: Optional[Path] = None

    def __post_init__(self) -> None:
        seen: Dict[str, int] = {}
        for index, entry in enumerate(self.entries):
            if entry.subject_id in seen:
                raise ManifestError(
                    f"subject_id 重複: {entry.subject_id} (第 {seen[entry.subject_id] + 1} 與 {index + 1} 列)",
                    field="subject_id",
                )
            seen[entry.subject_id] = index

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    @property
    def subject_ids(self) -> List[str]:
        return [e.subject_id for e in self.entries]

    @property
    def labels(self) -> List[int]:
        return [int(e.label) for e in self.entries]

    def by_id(self) -> Dict[str, ManifestEntry]:
        return {e.subject_id: e for e in self.entries}

    def class_counts(self) -> Dict[DiagnosisLabel, int]:
        counts = {label: 0 for label in DiagnosisLabel}
        for entry in self.entries:
            counts[entry.label] += 1
        return counts

    def subset(self, subject_ids: Sequence[str]) -> Manifest:
        """依給定順序取出子集合"""
        lookup = self.by_id()
        missing = [s for s in subject_ids if s not in lookup]
        if missing:
            raise ManifestError(f"manifest 中沒有 subject: {missing[0]}", field="subject_id")
        return Manifest([lookup[s] for s in subject_ids], root=self.root)

    def volume_path(self, entry: ManifestEntry) -> Path:
        return entry.resolve(self.root)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.subject_id, int(e.label), e.path) for e in self.entries], columns=MANIFEST_COLUMNS
        )

    def save(self, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
        return write_table(self.to_frame(), path, config_hash)

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, root: Optional[Path] = None, first_line: int = 2
    ) -> Manifest:
        missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
        if missing:
            raise ManifestError(f"manifest 缺少欄位: {', '.join(missing)}", field=missing[0])
        entries = []
        for row_number, row in enumerate(frame.itertuples(index=False), start=first_line):
            label = str(row.label).strip()
            if label not in ("0", "1"):
                raise ManifestError(f"標籤必須為 0 或 1: {row.label!r}", field="label", line=row_number)
            if pd.isna(row.path) or not str(row.path).strip():
                raise ManifestError("path 不可為空", field="path", line=row_number)
            entries.append(ManifestEntry(str(row.subject_id), DiagnosisLabel(int(label)), str(row.path)))
        return cls(entries, root=root)

    @classmethod
    def load(cls, path: Union[str, Path]) -> Manifest:
        path = Path(path)
        try:
            frame = read_table(path, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError as e:
            raise ManifestError(f"manifest 是空的: {path}") from e
        first_line = 3 if read_config_hash(path) is not None else 2
        manifest = cls.from_frame(frame, root=path.parent, first_line=first_line)
        counts = manifest.class_counts()
        logger.info(
            f"📊 載入 manifest {path}: {len(manifest)} 位受試者 "
            f"(ADHD {counts[DiagnosisLabel.ADHD]}, HV {counts[DiagnosisLabel.HV]})"
        )
        return manifest
