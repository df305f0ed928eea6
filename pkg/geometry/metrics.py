"""
Метрики облаков точек: L1-расстояние Чамфера и F-score.
"""

from dataclasses import dataclass
from typing import Tuple

import torch

from geometry.pointcloud import check_cloud
from utilities.errors import ContractError


@dataclass(frozen=True)
class MetricConfig:
    """Порог F-score применяется к квадрату расстояния."""
    tau: float = 1e-3

    def __post_init__(self):
        if not self.tau > 0:
            raise ContractError(f"tau должен быть положительным, получено {self.tau}")


def _nearest_indices(src: torch.Tensor, dst: torch.Tensor) -> torch.Tensor:
    """Индекс ближайшей точки dst для каждой точки src (ничьи к меньшему индексу)."""
    with torch.no_grad():
        dist = torch.cdist(
            src.detach().to(torch.float64), dst.detach().to(torch.float64),
            compute_mode='donot_use_mm_for_euclid_dist'
        )
        return dist.argmin(dim=-1)


def _nearest_squared(src: torch.Tensor, dst: torch.Tensor) -> torch.Tensor:
    with torch.no_grad():
        diff = src.detach().to(torch.float64).unsqueeze(-2) - dst.detach().to(torch.float64).unsqueeze(-3)
        return (diff ** 2).sum(dim=-1).min(dim=-1).values


def _directed_l1(src: torch.Tensor, dst: torch.Tensor) -> torch.Tensor:
    idx = _nearest_indices(src, dst)
    matched = torch.gather(dst, -2, idx.unsqueeze(-1).expand(*idx.shape, 3))
    return torch.linalg.vector_norm(src - matched, dim=-1).mean(dim=-1)


def _check_pair(p: torch.Tensor, q: torch.Tensor):
    check_cloud(p, "P", finite=False)
    check_cloud(q, "Q", finite=False)
    if p.dim() != q.dim() or (p.dim() == 3 and p.shape[0] != q.shape[0]):
        raise ContractError(f"Несовместимые пакеты облаков: {tuple(p.shape)} и {tuple(q.shape)}")


def chamfer_l1(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """
    L1-расстояние Чамфера с усреднением по каждому множеству:

        1/(2|P|) Σ_p min_q ||p - q|| + 1/(2|Q|) Σ_q min_p ||q - p||

    Размеры облаков могут отличаться. Дифференцируемо по обоим аргументам,
    ближайший сосед выбирается без градиента. NaN в координатах дает NaN.

    Args:
        p: Облако [N, 3] или пакет [B, N, 3]
        q: Облако [M, 3] или пакет [B, M, 3]

    Returns:
        Скаляр или тензор [B]
    """
    _check_pair(p, q)
    return 0.5 * _directed_l1(p, q) + 0.5 * _directed_l1(q, p)


def fscore_components(p: torch.Tensor, g: torch.Tensor,
                      cfg: MetricConfig = MetricConfig()) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    F-score, точность и полнота в процентах.

    Точность: доля точек p, у которых квадрат расстояния до g меньше tau;
    полнота: то же для g относительно p.
    """
    _check_pair(p, g)
    precision = (_nearest_squared(p, g) < cfg.tau).to(torch.float64).mean(dim=-1) * 100.0
    recall = (_nearest_squared(g, p) < cfg.tau).to(torch.float64).mean(dim=-1) * 100.0
    total = precision + recall
    score = torch.where(total > 0, 2.0 * precision * recall / torch.clamp(total, min=1e-12),
                        torch.zeros_like(total))
    return score, precision, recall


def fscore(p: torch.Tensor, g: torch.Tensor, cfg: MetricConfig = MetricConfig()) -> torch.Tensor:
    """F-score по шкале 0..100."""
    return fscore_components(p, g, cfg)[0]
