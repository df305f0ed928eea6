"""
Ортографические рендеры глубины облака точек с z-буфером.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch

from geometry.pointcloud import check_cloud
from utilities.errors import ContractError

NUM_VIEWS = 24
AZIMUTH_STEP = 360.0 / NUM_VIEWS
ELEVATION = 30.0
# Яркость ближайшей и самой дальней точки; пустые пиксели равны 0
NEAR_INTENSITY = 1.0
FAR_INTENSITY = 0.1


@dataclass(frozen=True)
class ViewSpec:
    """Вид с азимутом azimuth_index·15° и фиксированным возвышением."""
    azimuth_index: int
    elevation: float = ELEVATION
    scale: float = 1.0

    def __post_init__(self):
        if not 0 <= self.azimuth_index < NUM_VIEWS:
            raise ContractError(f"Индекс азимута должен лежать в [0, {NUM_VIEWS}), получено {self.azimuth_index}")
        if self.scale <= 0:
            raise ContractError(f"Масштаб проекции должен быть положительным: {self.scale}")

    @property
    def azimuth(self) -> float:
        return self.azimuth_index * AZIMUTH_STEP


def view_rotation(azimuth: float, elevation: float) -> np.ndarray:
    """Поворот вокруг вертикали на азимут, затем наклон камеры на возвышение."""
    a = math.radians(azimuth % 360.0)
    e = math.radians(elevation)
    yaw = np.array([
        [math.cos(a), 0.0, math.sin(a)],
        [0.0, 1.0, 0.0],
        [-math.sin(a), 0.0, math.cos(a)],
    ])
    pitch = np.array([
        [1.0, 0.0, 0.0],
        [0.0, math.cos(e), -math.sin(e)],
        [0.0, math.sin(e), math.cos(e)],
    ])
    return pitch @ yaw


def render_depth_at(cloud: torch.Tensor, azimuth: float, elevation: float = ELEVATION,
                    resolution: int = 32, scale: float = 1.0) -> torch.Tensor:
    """
    Рендер при произвольном азимуте в градусах.

    Камера смотрит вдоль -z; ближайшая к камере точка пикселя побеждает.
    Яркость линейна по глубине: z = 1 → 1.0, z = -1 → 0.1.

    Returns:
        Изображение [resolution, resolution] float32 в [0, 1]
    """
    check_cloud(cloud)
    if resolution < 1:
        raise ContractError(f"Разрешение должно быть положительным: {resolution}")

    points = cloud.detach().cpu().to(torch.float64).numpy() @ view_rotation(azimuth, elevation).T
    x, y, z = points[:, 0] / scale, points[:, 1] / scale, points[:, 2] / scale

    col = np.clip(np.floor((x + 1.0) / 2.0 * resolution), 0, resolution - 1).astype(np.int64)
    row = np.clip(np.floor((1.0 - y) / 2.0 * resolution), 0, resolution - 1).astype(np.int64)
    intensity = NEAR_INTENSITY - (NEAR_INTENSITY - FAR_INTENSITY) * (1.0 - z) / 2.0
    intensity = np.clip(intensity, FAR_INTENSITY, NEAR_INTENSITY)

    image = np.zeros((resolution, resolution), dtype=np.float64)
    # Яркость монотонна по z, поэтому максимум яркости и есть z-буфер
    np.maximum.at(image, (row, col), intensity)
    return torch.from_numpy(image).to(torch.float32)


def render_depth(cloud: torch.Tensor, view: ViewSpec, resolution: int = 32) -> torch.Tensor:
    return render_depth_at(cloud, view.azimuth, view.elevation, resolution, view.scale)


def render_views(cloud: torch.Tensor, resolution: int = 32) -> torch.Tensor:
    """Все 24 канонических вида: [24, resolution, resolution]."""
    return torch.stack([render_depth(cloud, ViewSpec(i), resolution) for i in range(NUM_VIEWS)])
