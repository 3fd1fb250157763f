"""
張量核心：row-major numpy 張量運算與可重現亂數來源
"""

from .random import RandomSource
from .core import (
    DType, zeros, ones, add, sub, multiply, scale, tensor_sum, tensor_mean,
    matmul, reshape, gaussian_fill,
)

__all__ = [
    'RandomSource', 'DType', 'zeros', 'ones', 'add', 'sub', 'multiply', 'scale',
    'tensor_sum', 'tensor_mean', 'matmul', 'reshape', 'gaussian_fill',
]
