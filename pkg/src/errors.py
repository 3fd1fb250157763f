#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
3D LoRA 微調引擎 - 例外類別
所有錯誤皆繼承自 Lora3DError，同時保留呼叫端慣用的內建型別 (ValueError)
"""

from __future__ import annotations

from typing import Optional


class Lora3DError(Exception):
    """本專案所有錯誤的共同基底"""


class DimensionError(Lora3DError, ValueError):
    """張量形狀或元素數量不符"""


class ShapeError(DimensionError):
    """層的輸入 / 梯度形狀與前向定義不符"""


class ArgumentError(Lora3DError, ValueError):
    """純量參數不合法 (負標準差、dropout rate ≥ 1、rank 過大、非二元標籤...)"""


class DegenerateInputError(ArgumentError):
    """只有單一類別的輸入，ROC / AUC 無定義"""


class ConfigurationError(Lora3DError, ValueError):
    """實驗或訓練設定錯誤"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class ManifestError(ConfigurationError):
    """Manifest 內容不合法 (重複 subject、非二元標籤...)"""


class RegistryError(Lora3DError, ValueError):
    """梯度與可訓練參數登錄表不一致"""


class FormatError(Lora3DError, ValueError):
    """二進位容器格式錯誤 (magic / version / 截斷)"""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class CheckpointLoadError(Lora3DError, ValueError):
    """Checkpoint 張量與模型不相容"""

    def __init__(self, name: str, message: str):
        self.name = name
        super().__init__(f"tensor '{name}': {message}")
