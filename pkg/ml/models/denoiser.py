"""
Денойзер: токены времени, изображения и патчей облака проходят через
стандартный трансформер и проецируются обратно в облако x̂⁰.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import torch
import torch.nn as nn

from geometry.sampling import PatchSet, build_patches
from ml.models.point_encoder import PatchEncoder
from ml.models.transformer import Mlp, TransformerEncoder, init_weights
from ml.numerics.rng import SeededRng
from utilities.errors import ConfigError, ContractError, ShapeError


@dataclass(frozen=True)
class BackboneConfig:
    """Гиперпараметры денойзера."""
    embed_dim: int = 384
    depth: int = 16
    num_heads: int = 16
    num_groups: int = 64
    group_size: int = 32
    drop_path_rate: float = 0.1
    use_positional_embedding: bool = True
    encoder_channels: Tuple[int, int, int] = (128, 256, 512)
    pos_hidden: int = 128
    mlp_ratio: float = 4.0
    predict_offsets: bool = False

    @property
    def n_points(self) -> int:
        return self.num_groups * self.group_size

    def validate(self) -> "BackboneConfig":
        if self.embed_dim % self.num_heads != 0:
            raise ConfigError(
                f"embed_dim={self.embed_dim} не делится на num_heads={self.num_heads}"
            )
        if self.embed_dim % 2 != 0:
            raise ConfigError(f"embed_dim должно быть четным, получено {self.embed_dim}")
        if self.depth < 1 or self.num_groups < 1 or self.group_size < 1:
            raise ConfigError("depth, num_groups и group_size должны быть положительными")
        if not 0.0 <= self.drop_path_rate < 1.0:
            raise ConfigError(f"drop_path_rate вне [0, 1): {self.drop_path_rate}")
        if len(self.encoder_channels) != 3:
            raise ConfigError(f"Ожидается три канала PointNet, получено {self.encoder_channels}")
        return self


class Denoiser(nn.Module):
    """
    Предсказатель x̂⁰ = f(xᵗ, t, c).

    Последовательность токенов: [время, изображение, патч_1..патч_s],
    позиционные эмбеддинги добавляются один раз перед первым блоком.
    """

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg.validate()
        self.logger = logging.getLogger(__name__)
        dim = cfg.embed_dim

        self.patch_encoder = PatchEncoder(dim, cfg.encoder_channels)
        self.pos_embed = Mlp(3, cfg.pos_hidden, dim)
        self.time_pos = nn.Parameter(torch.zeros(1, dim))
        self.image_pos = nn.Parameter(torch.zeros(1, dim))
        self.time_mlp = Mlp(dim, dim, dim)
        self.blocks = TransformerEncoder(
            dim, cfg.depth, cfg.num_heads,
            mlp_ratio=cfg.mlp_ratio,
            drop_path_rate=cfg.drop_path_rate
        )
        self.output_proj = nn.Linear(dim, cfg.group_size * 3)

        init_weights(self)
        nn.init.trunc_normal_(self.time_pos, std=0.02)
        nn.init.trunc_normal_(self.image_pos, std=0.02)

        if not cfg.use_positional_embedding:
            for param in self.positional_parameters():
                nn.init.zeros_(param)
                param.requires_grad_(False)

    def positional_parameters(self):
        return [*self.pos_embed.parameters(), self.time_pos, self.image_pos]

    def encode_patches(self, patches: PatchSet) -> torch.Tensor:
        return self.patch_encoder(patches.groups)

    def positional_embed(self, centers: torch.Tensor) -> torch.Tensor:
        """MLP-эмбеддинг абсолютных координат центров [..., s, 3] → [..., s, D]."""
        if centers.shape[-1] != 3:
            raise ShapeError(f"Центры должны иметь 3 координаты, получено {tuple(centers.shape)}")
        if not self.cfg.use_positional_embedding:
            return centers.new_zeros(*centers.shape[:-1], self.cfg.embed_dim)
        return self.pos_embed(centers)

    def token_positions(self, centers: torch.Tensor) -> torch.Tensor:
        """Позиционные векторы всей последовательности [..., 2+s, D]."""
        patch_pos = self.positional_embed(centers)
        lead = patch_pos.shape[:-2]
        time_pos = self.time_pos.to(patch_pos.dtype).expand(*lead, 1, -1)
        image_pos = self.image_pos.to(patch_pos.dtype).expand(*lead, 1, -1)
        if not self.cfg.use_positional_embedding:
            time_pos = torch.zeros_like(time_pos)
            image_pos = torch.zeros_like(image_pos)
        return torch.cat([time_pos, image_pos, patch_pos], dim=-2)

    def sinusoidal(self, t: Union[int, torch.Tensor]) -> torch.Tensor:
        """[sin(t·f_i) | cos(t·f_i)], f_i = 10000^(−2i/D)."""
        half = self.cfg.embed_dim // 2
        steps = torch.as_tensor(t, dtype=torch.float64)
        exponents = torch.arange(half, dtype=torch.float64) * (-2.0 / self.cfg.embed_dim)
        freqs = torch.pow(torch.tensor(10000.0, dtype=torch.float64), exponents)
        args = steps.unsqueeze(-1) * freqs
        return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)

    def time_token(self, t: Union[int, torch.Tensor]) -> torch.Tensor:
        """Токен шага: [D] для скалярного t, [B, D] для пакета."""
        dtype = self.output_proj.weight.dtype
        return self.time_mlp(self.sinusoidal(t).to(dtype))

    def assemble_tokens(self, time_tok: torch.Tensor, image_emb: torch.Tensor,
                        patch_toks: torch.Tensor, pos: torch.Tensor) -> torch.Tensor:
        """
        Args:
            time_tok: [B, D]
            image_emb: [B, D]
            patch_toks: [B, s, D]
            pos: [B, 2+s, D]

        Returns:
            Последовательность [B, 2+s, D]
        """
        dim = self.cfg.embed_dim
        for name, tensor in (("time", time_tok), ("image", image_emb),
                             ("patches", patch_toks), ("pos", pos)):
            if tensor.shape[-1] != dim:
                raise ContractError(
                    f"Токены '{name}' имеют размерность {tensor.shape[-1]}, ожидается {dim}"
                )
        seq = torch.cat([time_tok.unsqueeze(-2), image_emb.unsqueeze(-2), patch_toks], dim=-2)
        if pos.shape != seq.shape:
            raise ContractError(
                f"Позиционные эмбеддинги {tuple(pos.shape)} не совпадают с последовательностью {tuple(seq.shape)}"
            )
        return seq + pos

    def transformer_forward(self, seq: torch.Tensor, rng: Optional[SeededRng] = None) -> torch.Tensor:
        return self.blocks(seq, rng)

    def project_output(self, seq_out: torch.Tensor,
                       centers: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Токены патчей → облако [B, s·k, 3]; выходы времени и изображения отбрасываются."""
        patch_out = seq_out[..., 2:, :]
        points = self.output_proj(patch_out)
        points = points.reshape(*points.shape[:-1], self.cfg.group_size, 3)
        if self.cfg.predict_offsets:
            if centers is None:
                raise ContractError("predict_offsets требует центры патчей")
            points = points + centers.unsqueeze(-2)
        return points.reshape(*points.shape[:-3], -1, 3)

    def forward(self, xt: torch.Tensor, t: Union[int, torch.Tensor], cond: torch.Tensor,
                rng: Optional[SeededRng] = None) -> torch.Tensor:
        """
        denoise: патчи → токены (+ позиции) → трансформер → проекция.

        В режиме обучения стартовый индекс FPS выбирается из rng,
        в режиме оценки он равен 0.
        """
        single = xt.dim() == 2
        if single:
            xt = xt.unsqueeze(0)
            cond = cond.unsqueeze(0)
        batch, n_points, _ = xt.shape
        if n_points != self.cfg.n_points:
            raise ContractError(
                f"Ожидается облако из {self.cfg.n_points} точек (s·k), получено {n_points}"
            )
        if cond.shape != (batch, self.cfg.embed_dim):
            raise ShapeError(f"Условие {tuple(cond.shape)} не совпадает с ({batch}, {self.cfg.embed_dim})")

        steps = torch.as_tensor(t, dtype=torch.long)
        if steps.dim() == 0:
            steps = steps.expand(batch)

        if self.training and rng is not None:
            starts = rng.integers(0, n_points, size=batch)
        else:
            starts = [0] * batch
        patch_sets = [
            build_patches(xt[b], self.cfg.num_groups, self.cfg.group_size, start_index=int(starts[b]))
            for b in range(batch)
        ]
        groups = torch.stack([p.groups for p in patch_sets])
        centers = torch.stack([p.centers for p in patch_sets])

        patch_toks = self.patch_encoder(groups)
        seq = self.assemble_tokens(self.time_token(steps), cond.to(patch_toks.dtype),
                                   patch_toks, self.token_positions(centers))
        out = self.project_output(self.transformer_forward(seq, rng), centers)
        return out[0] if single else out

    denoise = forward
