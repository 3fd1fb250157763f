"""
神經網路層：3D 卷積、凍結正規化、GELU / ReLU、Dropout、池化、全連接層
"""

from .base import LayerGrads
from .conv3d import Conv3d, conv3d_forward, conv3d_backward, conv_output_extents
from .functional import (
    gelu, gelu_backward, relu, relu_backward,
    Dropout, DropoutMode, dropout_forward, dropout_backward,
    Linear, linear_forward, linear_backward,
    global_avg_pool, global_avg_pool_backward,
    MaxPool3d, max_pool3d, max_pool3d_backward,
    FrozenNorm, frozen_norm_forward, frozen_norm_backward,
)

__all__ = [
    'LayerGrads', 'Conv3d', 'conv3d_forward', 'conv3d_backward', 'conv_output_extents',
    'gelu', 'gelu_backward', 'relu', 'relu_backward',
    'Dropout', 'DropoutMode', 'dropout_forward', 'dropout_backward',
    'Linear', 'linear_forward', 'linear_backward',
    'global_avg_pool', 'global_avg_pool_backward',
    'MaxPool3d', 'max_pool3d', 'max_pool3d_backward',
    'FrozenNorm', 'frozen_norm_forward', 'frozen_norm_backward',
]
