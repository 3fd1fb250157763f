#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CSV 產出物讀寫
第一行為 '# config_hash=<hex>' 註解，其後是一般的 pandas CSV
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

HASH_PREFIX = "# config_hash="


def write_table(frame: pd.DataFrame, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        if config_hash is not None:
            f.write(f"{HASH_PREFIX}{config_hash}\n")
        frame.to_csv(f, index=False, lineterminator="\n", float_format="%.17g")
    logger.debug(f"💾 寫出 {len(frame)} 列: {path}")
    return path


def read_table(path: Union[str, Path], **kwargs: object) -> pd.DataFrame:
    """
    只略過開頭的 config hash 行；欄位內的 '#' 視為一般字元
    浮點數以 round_trip 解析，讀回的值與 %.17g 寫出的值逐位元相同
    """
    skiprows = 1 if read_config_hash(path) is not None else 0
    kwargs.setdefault("float_precision", "round_trip")
    return pd.read_csv(path, skiprows=skiprows, **kwargs)  # type: ignore[call-overload]


def read_config_hash(path: Union[str, Path]) -> Optional[str]:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    return first[len(HASH_PREFIX):] if first.startswith(HASH_PREFIX) else None
