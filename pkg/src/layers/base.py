"""
層共用的資料結構
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np


@dataclass
class LayerGrads:
    """反向傳播結果：輸入梯度 + 以參數名稱為鍵的參數梯度"""
    input_grad: np.ndarray
    params: Dict[str, np.ndarray] = field(default_factory=dict)
