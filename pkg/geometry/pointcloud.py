"""
Облака точек: проверка, нормализация и текстовый формат "x y z".
"""

import logging
from pathlib import Path
from typing import Tuple

import numpy as np
import torch

from utilities.errors import ContractError, FormatError

logger = logging.getLogger(__name__)


def check_cloud(cloud: torch.Tensor, name: str = "cloud", finite: bool = True) -> torch.Tensor:
    """
    Проверка облака [N, 3] или пакета облаков [B, N, 3].

    Raises:
        ContractError: неверная форма, пустое облако или нечисловые координаты
    """
    if cloud.dim() not in (2, 3) or cloud.shape[-1] != 3:
        raise ContractError(f"{name}: ожидается форма [N, 3] или [B, N, 3], получено {tuple(cloud.shape)}")
    if cloud.shape[-2] < 1:
        raise ContractError(f"{name}: пустое облако точек")
    if finite and not torch.isfinite(cloud).all():
        raise ContractError(f"{name}: координаты содержат NaN/Inf")
    return cloud


def normalize_cloud(cloud: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, float]:
    """
    Центрирование в начале координат и масштабирование до max ||p|| = 1.

    Args:
        cloud: Облако [N, 3]

    Returns:
        (нормализованное облако, центр [3], масштаб). Для вырожденного облака
        (все точки совпадают) масштаб равен 1.
    """
    check_cloud(cloud)
    if cloud.dim() != 2:
        raise ContractError("normalize_cloud принимает одно облако [N, 3]")

    points = cloud.detach().to(torch.float64)
    center = points.mean(dim=0)
    centered = points - center
    scale = float(torch.linalg.vector_norm(centered, dim=-1).max())
    if scale <= 0.0:
        scale = 1.0

    normalized = (centered / scale).to(cloud.dtype)
    return normalized, center.to(cloud.dtype), scale


def resample_cloud(cloud: torch.Tensor, n: int, rng) -> torch.Tensor:
    """
    Приведение облака к n точкам случайным выбором.

    Без повторов, если точек хватает, иначе с повторами.
    """
    check_cloud(cloud)
    if n < 1:
        raise ContractError(f"Число точек должно быть положительным, получено {n}")
    total = cloud.shape[0]
    indices = rng.choice(total, size=n, replace=total < n)
    return cloud[torch.as_tensor(np.sort(indices) if total >= n else indices)]


def read_cloud_text(path: Path) -> torch.Tensor:
    """
    Чтение облака в текстовом формате: одна тройка "x y z" на строку,
    строки с '#' игнорируются.

    Raises:
        FormatError: файл пуст или строки не являются тройками чисел
    """
    try:
        values = np.loadtxt(path, comments='#', dtype=np.float64, ndmin=2, encoding='utf-8')
    except ValueError as e:
        raise FormatError(f"Ошибка разбора облака точек {path}: {e}") from e

    if values.size == 0:
        raise FormatError(f"Файл облака точек пуст: {path}")
    if values.shape[1] != 3:
        raise FormatError(f"Ожидается 3 координаты в строке, найдено {values.shape[1]}: {path}")

    logger.debug(f"Прочитано {values.shape[0]} точек из {path}")
    return torch.from_numpy(values).to(torch.float32)


def write_cloud_text(path: Path, cloud: torch.Tensor, comment: str = "") -> None:
    """Запись облака [N, 3] в текстовом формате."""
    check_cloud(cloud)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path, cloud.detach().cpu().to(torch.float64).numpy(),
        fmt='%.9g', header=comment, comments='# ', encoding='utf-8'
    )
