"""
PointNet-кодировщик патчей: общий поточечный MLP и max-pool по точкам.
"""

from typing import Sequence

import torch
import torch.nn as nn

from utilities.errors import ShapeError


class PatchEncoder(nn.Module):
    """
    Один токен на патч.

    3 → c1 → c2 поточечно, max-pool, конкатенация глобального вектора
    к каждой точке, 2·c2 → c3 → embed_dim, финальный max-pool.
    Результат инвариантен к перестановке точек внутри патча.
    """

    def __init__(self, embed_dim: int, channels: Sequence[int] = (128, 256, 512)):
        super().__init__()
        c1, c2, c3 = channels
        self.embed_dim = embed_dim
        self.first_mlp = nn.Sequential(
            nn.Linear(3, c1),
            nn.ReLU(),
            nn.Linear(c1, c2)
        )
        self.second_mlp = nn.Sequential(
            nn.Linear(2 * c2, c3),
            nn.ReLU(),
            nn.Linear(c3, embed_dim)
        )

    def forward(self, groups: torch.Tensor) -> torch.Tensor:
        """
        Args:
            groups: Патчи [..., s, k, 3] в координатах относительно центров

        Returns:
            Токены [..., s, embed_dim]
        """
        if groups.dim() < 3 or groups.shape[-1] != 3:
            raise ShapeError(f"Ожидаются патчи [..., s, k, 3], получено {tuple(groups.shape)}")

        feature = self.first_mlp(groups)
        pooled = feature.max(dim=-2, keepdim=True).values
        feature = torch.cat([pooled.expand_as(feature), feature], dim=-1)
        feature = self.second_mlp(feature)
        return feature.max(dim=-2).values
