"""
Pydantic 報告模型
crossval 的 report.json 與 eval 的摘要
"""

import json
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class FoldRow(BaseModel):
    """單一 fold 的兩個最佳 checkpoint 指標"""
    fold: int = Field(..., description="fold 編號 (0 起算)")
    n_train: int = Field(..., description="訓練樣本數")
    n_val: int = Field(..., description="驗證樣本數")
    best_acc_epoch: int = Field(..., description="最高 accuracy 的 epoch")
    best_acc_accuracy: float
    best_acc_auc: float
    best_auc_epoch: int = Field(..., description="最高 AUC 的 epoch")
    best_auc_accuracy: float
    best_auc_auc: float


class MeanRow(BaseModel):
    """跨 fold 平均 (variant 為 best_acc 或 best_auc)"""
    variant: str
    accuracy: float
    auc: float


class RunReport(BaseModel):
    """交叉驗證報告；除 wall_clock_seconds 外皆可由 (seed, config, data) 重算"""
    config: Dict[str, Any] = Field(..., description="完整解析後的設定 (含預設值)")
    config_hash: str
    trainable_params: int = Field(..., description="LoRA + head 可訓練參數")
    backbone_digest: str = Field(..., description="凍結 backbone 張量的 SHA-256")
    folds: List[FoldRow]
    means: List[MeanRow]
    wall_clock_seconds: float

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class EvalReport(BaseModel):
    """eval 指令的結果"""
    checkpoint: str
    config_hash: str
    n_samples: int
    threshold: float
    accuracy: float
    auc: Optional[float] = Field(None, description="只有單一類別時為空")
    confusion: Dict[str, int]
    roc_csv: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
