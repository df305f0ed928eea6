"""
Полная модель: кодировщик видов + агрегатор дают условие, денойзер
предсказывает x̂⁰ по зашумленному облаку.
"""

import logging
from collections import OrderedDict
from typing import Dict, List, Optional

import torch
import torch.nn as nn

from ml.models.denoiser import BackboneConfig, Denoiser
from ml.models.fusion_net import FusionNet
from ml.models.image_encoder import ImageEncoder, VisionConfig
from ml.numerics.rng import SeededRng
from utilities.errors import ContractError

logger = logging.getLogger(__name__)

# Префикс имени параметра → группа для аудита градиентов
PARAMETER_GROUPS = OrderedDict([
    ("image_encoder", ("conditioner.encoder.",)),
    ("aggregator", ("conditioner.fusion.",)),
    ("patch_encoder", ("denoiser.patch_encoder.",)),
    ("positional", ("denoiser.pos_embed.", "denoiser.time_pos", "denoiser.image_pos")),
    ("time_embedding", ("denoiser.time_mlp.",)),
    ("transformer", ("denoiser.blocks.",)),
    ("output_projection", ("denoiser.output_proj.",)),
])


class ViewConditioner(nn.Module):
    """encode_views: кодирование каждого вида и агрегация в один вектор."""

    def __init__(self, cfg: VisionConfig, embed_dim: int):
        super().__init__()
        self.encoder = ImageEncoder(cfg, embed_dim)
        self.fusion = FusionNet(embed_dim, mode=cfg.aggregation, num_heads=cfg.aggregator_heads)

    def forward(self, views: torch.Tensor) -> torch.Tensor:
        """
        Args:
            views: [V, H, W] или пакет [B, V, H, W]

        Returns:
            [D] или [B, D]
        """
        single = views.dim() == 3
        if single:
            views = views.unsqueeze(0)
        if views.dim() != 4 or views.shape[1] == 0:
            raise ContractError(f"Ожидаются виды [B, V, H, W], получено {tuple(views.shape)}")
        batch, count, height, width = views.shape
        embeddings = self.encoder(views.reshape(batch * count, height, width))
        cond = self.fusion(embeddings.reshape(batch, count, -1))
        return cond[0] if single else cond

    encode_views = forward


class PointCloudReconstructor(nn.Module):
    """Реконструкция облака точек по одному или нескольким изображениям."""

    def __init__(self, backbone: BackboneConfig, vision: VisionConfig):
        super().__init__()
        self.backbone_config = backbone
        self.vision_config = vision
        self.conditioner = ViewConditioner(vision, backbone.embed_dim)
        self.denoiser = Denoiser(backbone)

    @property
    def n_points(self) -> int:
        return self.backbone_config.n_points

    def encode_views(self, views: torch.Tensor) -> torch.Tensor:
        return self.conditioner(views)

    def predictor(self, rng: Optional[SeededRng] = None):
        """Предсказатель (xᵗ, t, c) → x̂⁰ для диффузионного процесса."""
        def predict(xt: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
            return self.denoiser(xt, t, cond, rng)
        return predict

    def forward(self, xt: torch.Tensor, t, views: torch.Tensor,
                rng: Optional[SeededRng] = None) -> torch.Tensor:
        return self.denoiser(xt, t, self.encode_views(views), rng)

    def parameter_groups(self) -> Dict[str, List[str]]:
        """Имена обучаемых параметров по группам; пустые группы опускаются."""
        groups: Dict[str, List[str]] = OrderedDict((name, []) for name in PARAMETER_GROUPS)
        for name, param in self.named_parameters():
            if not param.requires_grad:
                continue
            for group, prefixes in PARAMETER_GROUPS.items():
                if name.startswith(prefixes):
                    groups[group].append(name)
                    break
        return OrderedDict((g, names) for g, names in groups.items() if names)


def count_parameters(model: nn.Module, trainable_only: bool = False) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad or not trainable_only)


def build_model(backbone: BackboneConfig, vision: VisionConfig, seed: int,
                dtype: torch.dtype = torch.float32) -> PointCloudReconstructor:
    """Модель с детерминированной инициализацией от seed."""
    torch.manual_seed(seed)
    model = PointCloudReconstructor(backbone, vision).to(dtype)
    logger.info(
        f"Модель создана: {count_parameters(model)} параметров "
        f"({count_parameters(model, trainable_only=True)} обучаемых)"
    )
    return model
