"""
lora3d-adhd - 凍結 3D ResNet + LoRA adapter 的 ADHD 分類引擎
"""

__version__ = "0.1.0"
