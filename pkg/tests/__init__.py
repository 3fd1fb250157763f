"""
3D LoRA 微調引擎測試
"""
