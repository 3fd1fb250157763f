"""
訓練：BCE、AdamW、checkpoint、單 fold 訓練與交叉驗證
"""

from .losses import bce_with_logits, bce_with_logits_batch
from .optimizer import ParamGroup, AdamWState, AdamW, adamw_step, default_param_groups
from .checkpoint import (
    Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, encode_checkpoint, decode_checkpoint,
    save_checkpoint, load_checkpoint, tensor_digest,
)
from .trainer import (
    EpochLog, TrainLog, FoldResult, SelectionMetric, evaluate_scores, score_metrics,
    snapshot, train_fold,
)
from .crossval import (
    CrossValResult, run_crossval, restore_model, shared_backbone_weights,
    build_fold_model, write_fold_artifacts, checkpoint_config,
)

__all__ = [
    'bce_with_logits', 'bce_with_logits_batch',
    'ParamGroup', 'AdamWState', 'AdamW', 'adamw_step', 'default_param_groups',
    'Checkpoint', 'CHECKPOINT_MAGIC', 'CHECKPOINT_VERSION', 'encode_checkpoint', 'decode_checkpoint',
    'save_checkpoint', 'load_checkpoint', 'tensor_digest',
    'EpochLog', 'TrainLog', 'FoldResult', 'SelectionMetric', 'evaluate_scores', 'score_metrics',
    'snapshot', 'train_fold',
    'CrossValResult', 'run_crossval', 'restore_model', 'shared_backbone_weights',
    'build_fold_model', 'write_fold_artifacts', 'checkpoint_config',
]
