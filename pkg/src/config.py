#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
實驗設定
JSON 設定檔以 pydantic 驗證，分為 model / lora / train / data 四個區段；未列出的鍵一律拒絕
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigurationError
from .models.architecture import BackboneConfig
from .tensor.core import DType

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Section):
    """模型架構設定"""
    preset: Literal["resnet50-3d", "tiny"] = Field("resnet50-3d", description="backbone 架構預設")
    in_channels: int = Field(2, ge=1, description="輸入通道數 (FA, MD)")
    input_extents: Tuple[int, int, int] = Field((128, 128, 128), description="訓練網格大小 D, H, W")
    weights: Optional[str] = Field(None, description="存放 backbone 張量的 checkpoint 路徑")
    hidden_units: int = Field(128, ge=1, description="MLP head 隱藏層寬度")
    dropout: float = Field(0.5, ge=0.0, lt=1.0, description="head dropout rate")
    dtype: Literal["float32", "float64"] = Field("float32", description="運算精度")

    @field_validator("input_extents")
    @classmethod
    def _positive_extents(cls, value: Tuple[int, int, int]) -> Tuple[int, int, int]:
        if any(e < 1 for e in value):
            raise ValueError("空間大小必須皆為正")
        return value

    def backbone(self) -> BackboneConfig:
        return BackboneConfig.from_preset(self.preset, in_channels=self.in_channels)

    @property
    def tensor_dtype(self) -> DType:
        return DType.from_label(self.dtype)


class LoraSection(_Section):
    """LoRA adapter 設定"""
    rank: int = Field(4, ge=1, description="adapter rank r")
    scale: float = Field(1.0, gt=0.0, description="ΔW 的乘數")
    exclude: List[str] = Field(default_factory=list, description="不注入 adapter 的卷積名稱 (fnmatch)")
    enabled: bool = Field(True, description="是否注入 adapter")


class TrainSection(_Section):
    """訓練與交叉驗證設定"""
    epochs: int = Field(100, ge=1)
    batch_size: int = Field(4, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    folds: int = Field(5, ge=2)
    lr_lora: float = Field(1e-4, gt=0.0)
    lr_head: float = Field(1e-5, gt=0.0)
    weight_decay: float = Field(1e-4, ge=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    threshold: float = Field(0.5, ge=0.0)
    jobs: int = Field(1, ge=1)


class DataSection(_Section):
    """資料前處理設定"""
    normalize: bool = Field(True, description="逐通道 z-score")


class ExperimentConfig(_Section):
    """完整實驗設定 (預設值即 resnet50-3d 的標準訓練設定)"""
    model: ModelSection = Field(default_factory=ModelSection)  # type: ignore[arg-type]
    lora: LoraSection = Field(default_factory=LoraSection)  # type: ignore[arg-type]
    train: TrainSection = Field(default_factory=TrainSection)  # type: ignore[arg-type]
    data: DataSection = Field(default_factory=DataSection)  # type: ignore[arg-type]

    @property
    def rank(self) -> Optional[int]:
        """停用 adapter 時為 None"""
        return self.lora.rank if self.lora.enabled else None

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def with_overrides(self, **sections: Dict[str, Any]) -> ExperimentConfig:
        """以 {區段: {鍵: 值}} 覆寫並重新驗證，例如 with_overrides(train={"jobs": 2})"""
        data = self.to_dict()
        for section, values in sections.items():
            data.setdefault(section, {}).update({k: v for k, v in values.items() if v is not None})
        return parse_config(data)


def _field_path(loc: Tuple[Union[int, str], ...]) -> str:
    return ".".join(str(part) for part in loc)


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigurationError(first["msg"], field=_field_path(first["loc"])) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """讀取並驗證 JSON 設定檔；語法錯誤回報行號，驗證錯誤回報欄位路徑"""
    path = Path(path)
    logger.info(f"📊 載入設定檔: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"無法讀取設定檔 {path}: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"JSON 語法錯誤 (column {e.colno}): {e.msg}", line=e.lineno) from e
    if not isinstance(data, dict):
        raise ConfigurationError("設定檔最外層必須是物件", line=1)
    _resolve_weights_path(data, path.parent)
    return parse_config(data)


def _resolve_weights_path(data: Dict[str, Any], root: Path) -> None:
    """model.weights 的相對路徑以設定檔所在目錄為基準 (與 manifest 的體積路徑相同)"""
    model = data.get("model")
    if not isinstance(model, dict):
        return
    weights = model.get("weights")
    if isinstance(weights, str) and weights and not Path(weights).is_absolute():
        model["weights"] = str(root / weights)


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: ExperimentConfig) -> str:
    """完整解析後設定 (含預設值) 的 canonical JSON 之 SHA-256"""
    return hashlib.sha256(canonical_json(config.to_dict()).encode("utf-8")).hexdigest()
