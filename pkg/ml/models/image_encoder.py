"""
Компактный ViT для одноканальных рендеров глубины.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

from ml.models.transformer import TransformerEncoder, init_weights
from utilities.errors import ConfigError, ContractError

AGGREGATION_MODES = ("mfa", "avg")


@dataclass(frozen=True)
class VisionConfig:
    """Параметры кодировщика изображений и агрегатора видов."""
    image_size: int = 32
    patch_size: int = 4
    channels: int = 1
    depth: int = 4
    num_heads: int = 4
    aggregation: str = "mfa"
    aggregator_heads: int = 1

    @property
    def num_patches(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    def validate(self) -> "VisionConfig":
        if self.image_size % self.patch_size != 0:
            raise ConfigError(
                f"Размер изображения {self.image_size} не делится на патч {self.patch_size}"
            )
        if self.aggregation not in AGGREGATION_MODES:
            raise ConfigError(
                f"Неизвестный режим агрегации '{self.aggregation}', допустимы {AGGREGATION_MODES}"
            )
        return self


class ImageEncoder(nn.Module):
    """patchify → линейный эмбеддинг → 2D позиции → блоки → среднее → Linear."""

    def __init__(self, cfg: VisionConfig, embed_dim: int):
        super().__init__()
        self.cfg = cfg.validate()
        self.embed_dim = embed_dim
        patch_dim = cfg.channels * cfg.patch_size * cfg.patch_size

        self.patch_embed = nn.Linear(patch_dim, embed_dim)
        self.pos = nn.Parameter(torch.zeros(cfg.num_patches, embed_dim))
        self.blocks = TransformerEncoder(embed_dim, cfg.depth, cfg.num_heads, final_norm=False)
        self.head = nn.Linear(embed_dim, embed_dim)

        init_weights(self)
        nn.init.trunc_normal_(self.pos, std=0.02)

    def patchify(self, images: torch.Tensor) -> torch.Tensor:
        """[N, C, H, W] → [N, (H/p)·(W/p), C·p·p], патчи в построчном порядке."""
        n, c, h, w = images.shape
        p = self.cfg.patch_size
        if h % p != 0 or w % p != 0:
            raise ContractError(f"Размеры изображения {h}x{w} не делятся на патч {p}")
        if c != self.cfg.channels:
            raise ContractError(f"Ожидается {self.cfg.channels} каналов, получено {c}")
        x = images.reshape(n, c, h // p, p, w // p, p)
        x = x.permute(0, 2, 4, 1, 3, 5)
        return x.reshape(n, (h // p) * (w // p), c * p * p)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """
        Args:
            images: [N, H, W] или [N, C, H, W], пиксели в [0, 1]

        Returns:
            Эмбеддинги [N, embed_dim]
        """
        if images.dim() == 3:
            images = images.unsqueeze(1)
        tokens = self.patchify(images.to(self.patch_embed.weight.dtype))
        if tokens.shape[1] != self.pos.shape[0]:
            raise ContractError(
                f"Изображение дает {tokens.shape[1]} патчей, ожидается {self.pos.shape[0]}"
            )
        tokens = self.patch_embed(tokens) + self.pos
        tokens = self.blocks(tokens)
        return self.head(tokens.mean(dim=1))

    encode_image = forward
