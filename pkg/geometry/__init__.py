"""
Примитивы облаков точек: нормализация, FPS/KNN-патчи и метрики.
"""

from .pointcloud import (
    check_cloud, normalize_cloud, resample_cloud,
    read_cloud_text, write_cloud_text
)
from .sampling import PatchSet, fps, knn, build_patches
from .metrics import MetricConfig, chamfer_l1, fscore, fscore_components

__all__ = [
    'check_cloud', 'normalize_cloud', 'resample_cloud',
    'read_cloud_text', 'write_cloud_text',
    'PatchSet', 'fps', 'knn', 'build_patches',
    'MetricConfig', 'chamfer_l1', 'fscore', 'fscore_components'
]
