"""
命令列介面 (lora3d)
"""

from .main import cli, UsageFailure, setup_logging

__all__ = ['cli', 'UsageFailure', 'setup_logging']
