"""
Модели Облака: денойзер, кодировщик изображений и агрегатор видов.
"""

from .transformer import Attention, Block, DropPath, Mlp, TransformerEncoder
from .point_encoder import PatchEncoder
from .denoiser import BackboneConfig, Denoiser
from .image_encoder import VisionConfig, ImageEncoder
from .fusion_net import FusionNet
from .reconstructor import (
    ViewConditioner, PointCloudReconstructor, PARAMETER_GROUPS,
    count_parameters, build_model
)

__all__ = [
    'Attention', 'Block', 'DropPath', 'Mlp', 'TransformerEncoder', 'PatchEncoder',
    'BackboneConfig', 'Denoiser', 'VisionConfig', 'ImageEncoder', 'FusionNet',
    'ViewConditioner', 'PointCloudReconstructor', 'PARAMETER_GROUPS',
    'count_parameters', 'build_model'
]
