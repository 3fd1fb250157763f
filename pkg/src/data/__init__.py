"""
資料：VOL1 體積檔、manifest、重取樣 / 正規化、分層 k-fold、合成資料
"""

from .volume_io import VOLUME_MAGIC, encode_volume, decode_volume, save_volume, load_volume
from .manifest import DiagnosisLabel, ManifestEntry, Manifest
from .transforms import resize_trilinear, normalize, prepare_volume
from .splits import FoldSplit, stratified_kfold
from .synthetic import synth_generate, centered_blob, MANIFEST_NAME
from .repository import VolumeSet, VolumeRepository
from .tables import write_table, read_table, read_config_hash

__all__ = [
    'VOLUME_MAGIC', 'encode_volume', 'decode_volume', 'save_volume', 'load_volume',
    'DiagnosisLabel', 'ManifestEntry', 'Manifest',
    'resize_trilinear', 'normalize', 'prepare_volume',
    'FoldSplit', 'stratified_kfold',
    'synth_generate', 'centered_blob', 'MANIFEST_NAME',
    'VolumeSet', 'VolumeRepository',
    'write_table', 'read_table', 'read_config_hash',
]
