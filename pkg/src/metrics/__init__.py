"""
分類指標：混淆矩陣、accuracy、ROC / AUC
"""

from .classification import (
    ConfusionMatrix, RocCurve, confusion, accuracy, roc_curve, auc,
    auc_rank_oracle, roc_auc, export_roc_csv,
)

__all__ = [
    'ConfusionMatrix', 'RocCurve', 'confusion', 'accuracy', 'roc_curve', 'auc',
    'auc_rank_oracle', 'roc_auc', 'export_roc_csv',
]
