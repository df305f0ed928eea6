"""
Разбиение облака на патчи: FPS для центров и KNN для групп.

Все расстояния считаются в float64; равные расстояния разрешаются
в пользу меньшего индекса, поэтому результаты совпадают с переборным оракулом.
"""

from dataclasses import dataclass
from typing import Union

import torch

from geometry.pointcloud import check_cloud
from utilities.errors import ContractError


@dataclass
class PatchSet:
    """Центры патчей и сгруппированные соседи в координатах относительно центра."""
    center_indices: torch.Tensor  # [s] или [B, s]
    centers: torch.Tensor  # [s, 3] или [B, s, 3]
    neighbor_indices: torch.Tensor  # [s, k] или [B, s, k]
    groups: torch.Tensor  # [s, k, 3] или [B, s, k, 3]

    @property
    def s(self) -> int:
        return self.centers.shape[-2]

    @property
    def k(self) -> int:
        return self.groups.shape[-2]


def _as_batch(cloud: torch.Tensor):
    check_cloud(cloud)
    if cloud.dim() == 2:
        return cloud.unsqueeze(0), True
    return cloud, False


def _start_tensor(start_index, batch: int, n: int) -> torch.Tensor:
    start = torch.as_tensor(start_index, dtype=torch.long).reshape(-1)
    if start.numel() == 1:
        start = start.expand(batch).clone()
    if start.numel() != batch:
        raise ContractError(f"Ожидается {batch} стартовых индексов, получено {start.numel()}")
    if (start < 0).any() or (start >= n).any():
        raise ContractError(f"Стартовый индекс вне диапазона [0, {n})")
    return start


def fps(cloud: torch.Tensor, s: int, start_index: Union[int, torch.Tensor] = 0) -> torch.Tensor:
    """
    Жадный выбор наиболее удалённых точек.

    Первый выбор равен start_index, каждый следующий максимизирует минимальное
    расстояние до уже выбранных.

    Args:
        cloud: Облако [N, 3] или пакет [B, N, 3]
        s: Число центров, 1 <= s <= N
        start_index: Стартовый индекс (или тензор [B])

    Returns:
        Индексы [s] или [B, s]
    """
    xyz, single = _as_batch(cloud)
    batch, n, _ = xyz.shape
    if not 1 <= s <= n:
        raise ContractError(f"fps: требуется 1 <= s <= N, получено s={s}, N={n}")

    xyz = xyz.detach().to(torch.float64)
    rows = torch.arange(batch)
    picked = torch.zeros(batch, s, dtype=torch.long)
    distances = torch.full((batch, n), float('inf'), dtype=torch.float64)
    farthest = _start_tensor(start_index, batch, n)

    for i in range(s):
        picked[:, i] = farthest
        centroid = xyz[rows, farthest].unsqueeze(1)
        dist = ((xyz - centroid) ** 2).sum(dim=-1)
        distances = torch.minimum(distances, dist)
        # выбранные точки больше не участвуют
        distances[rows, farthest] = -1.0
        # argmax возвращает первый максимум: ничьи к меньшему индексу
        farthest = torch.argmax(distances, dim=1)

    return picked[0] if single else picked


def knn(cloud: torch.Tensor, query: torch.Tensor, k: int) -> torch.Tensor:
    """
    Точные k ближайших соседей, отсортированные по возрастанию расстояния.

    Args:
        cloud: Облако [N, 3] или [B, N, 3]
        query: Точка [3], набор точек [Q, 3] или пакет [B, Q, 3]
        k: Число соседей, k <= N

    Returns:
        Индексы [k], [Q, k] или [B, Q, k]
    """
    xyz, single = _as_batch(cloud)
    n = xyz.shape[1]
    if not 1 <= k <= n:
        raise ContractError(f"knn: требуется 1 <= k <= N, получено k={k}, N={n}")

    q = query.detach().to(torch.float64)
    squeeze_query = q.dim() == 1
    if squeeze_query:
        q = q.unsqueeze(0)
    if q.dim() == 2:
        q = q.unsqueeze(0).expand(xyz.shape[0], -1, -1)

    diff = q.unsqueeze(2) - xyz.detach().to(torch.float64).unsqueeze(1)
    dist = (diff ** 2).sum(dim=-1)
    order = torch.sort(dist, dim=-1, stable=True).indices[..., :k]

    if single:
        order = order[0]
        if squeeze_query:
            order = order[0]
    return order


def build_patches(cloud: torch.Tensor, s: int, k: int,
                  start_index: Union[int, torch.Tensor] = 0) -> PatchSet:
    """
    Разбиение облака на s патчей по k точек.

    Центры выбираются FPS, группы строятся KNN и хранятся как (сосед - центр).
    При обучении start_index берётся из ГСЧ шага, при оценке равен 0.
    """
    xyz, single = _as_batch(cloud)
    n = xyz.shape[1]
    if k > n:
        raise ContractError(f"build_patches: k={k} больше числа точек N={n}")

    center_indices = fps(xyz, s, start_index)
    rows = torch.arange(xyz.shape[0]).unsqueeze(1)
    centers = xyz[rows, center_indices]
    neighbor_indices = knn(xyz, centers, k)
    neighbors = xyz[rows.unsqueeze(2), neighbor_indices]
    groups = neighbors - centers.unsqueeze(2)

    if single:
        return PatchSet(center_indices[0], centers[0], neighbor_indices[0], groups[0])
    return PatchSet(center_indices, centers, neighbor_indices, groups)
