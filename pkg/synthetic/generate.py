"""
Сборка записей датасета из синтетических фигур и внешних облаков.
"""

import logging
from typing import Iterable, List, Optional, Sequence

import torch
from tqdm import tqdm

from geometry.pointcloud import normalize_cloud, resample_cloud
from ml.numerics.rng import SeededRng
from ml.training.datasets import DatasetRecord
from synthetic.render import render_views
from synthetic.shapes import KINDS, generate_shape, random_spec

logger = logging.getLogger(__name__)


def record_from_cloud(shape_id: int, category: int, cloud: torch.Tensor,
                      n_points: int, resolution: int, rng: SeededRng) -> DatasetRecord:
    """Нормализация, приведение к n_points и 24 рендера из нормированного облака."""
    normalized, _, _ = normalize_cloud(cloud.to(torch.float64))
    if normalized.shape[0] != n_points:
        normalized = resample_cloud(normalized, n_points, rng)
        # После прореживания максимум нормы может стать меньше 1
        normalized, _, _ = normalize_cloud(normalized)
    cloud32 = normalized.to(torch.float32)
    return DatasetRecord(
        shape_id=shape_id,
        category=category,
        cloud=cloud32,
        views=render_views(cloud32, resolution),
    )


def generate_dataset(count: int, seed: int, n_points: int = 2048, resolution: int = 32,
                     kinds: Optional[Sequence[str]] = None,
                     show_progress: bool = False) -> List[DatasetRecord]:
    """
    Воспроизводимый набор записей: одинаковые (seed, параметры) дают
    побитово одинаковые записи. Идентификаторы идут подряд с 0.
    """
    kinds = tuple(kinds) if kinds else KINDS
    rng = SeededRng(seed)
    records = []
    for shape_id in tqdm(range(count), desc="Генерация", disable=not show_progress, leave=False):
        kind = kinds[shape_id % len(kinds)]
        spec = random_spec(rng, kind)
        cloud = generate_shape(spec, n_points, rng)
        records.append(DatasetRecord(
            shape_id=shape_id,
            category=spec.category,
            cloud=cloud,
            views=render_views(cloud, resolution),
        ))
    logger.info(f"Сгенерировано {count} фигур, seed={seed}, N={n_points}")
    return records


def import_clouds(clouds: Iterable[torch.Tensor], seed: int, n_points: int = 2048,
                  resolution: int = 32, category: int = 0, first_id: int = 0) -> List[DatasetRecord]:
    """Записи из внешних облаков точек."""
    rng = SeededRng(seed)
    return [
        record_from_cloud(first_id + i, category, cloud, n_points, resolution, rng)
        for i, cloud in enumerate(clouds)
    ]
