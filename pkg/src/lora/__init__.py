"""
3D 卷積低秩適配 (W' = W + BA)
"""

from .adapter import (
    LoraAdapter, AdaptedConv3d, ConvLayer, ADAPTER_INIT_STD,
    init_adapter, adapt, adapted_forward, adapter_backward, merge, lora_param_count,
    conv_layer_forward, conv_layer_backward, frozen_conv,
)

__all__ = [
    'LoraAdapter', 'AdaptedConv3d', 'ConvLayer', 'ADAPTER_INIT_STD',
    'init_adapter', 'adapt', 'adapted_forward', 'adapter_backward', 'merge',
    'lora_param_count', 'conv_layer_forward', 'conv_layer_backward', 'frozen_conv',
]
