"""
Стандартные блоки ViT: pre-norm, многоголовое self-attention, MLP с GELU
и stochastic depth на общем ГСЧ.
"""

from typing import Optional

import torch
import torch.nn as nn

from ml.numerics import gelu, layer_norm, matmul, softmax
from ml.numerics.rng import SeededRng
from utilities.errors import ConfigError


class DropPath(nn.Module):
    """Stochastic depth: ветвь residual отбрасывается целиком для примера."""

    def __init__(self, drop_prob: float = 0.0):
        super().__init__()
        self.drop_prob = float(drop_prob)

    def forward(self, x: torch.Tensor, rng: Optional[SeededRng] = None) -> torch.Tensor:
        if self.drop_prob == 0.0 or not self.training or rng is None:
            return x
        keep = 1.0 - self.drop_prob
        batch = x.shape[0] if x.dim() == 3 else 1
        mask = torch.from_numpy(rng.uniform(size=batch) < keep).to(x.dtype)
        if x.dim() == 3:
            mask = mask.reshape(batch, 1, 1)
        else:
            mask = mask.reshape(())
        return x * mask / keep


class Mlp(nn.Module):
    """Двухслойный перцептрон с точной GELU."""

    def __init__(self, in_features: int, hidden_features: int, out_features: int):
        super().__init__()
        self.fc1 = nn.Linear(in_features, hidden_features)
        self.fc2 = nn.Linear(hidden_features, out_features)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(gelu(self.fc1(x)))


class Attention(nn.Module):
    """Полное многоголовое self-attention без маски."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        if dim % num_heads != 0:
            raise ConfigError(f"Размерность {dim} не делится на число голов {num_heads}")
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.scale = self.head_dim ** -0.5

        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, channels = x.shape
        qkv = self.qkv(x).reshape(batch, length, 3, self.num_heads, self.head_dim)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)

        attn = softmax(matmul(q, k.transpose(-2, -1)) * self.scale, axis=-1)
        y = matmul(attn, v).transpose(1, 2).reshape(batch, length, channels)
        return self.proj(y)


class Block(nn.Module):
    """x ← x + DropPath(MHSA(LN(x))); x ← x + DropPath(MLP(LN(x)))."""

    def __init__(self, dim: int, num_heads: int, mlp_ratio: float = 4.0, drop_path: float = 0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio), dim)
        self.drop_path = DropPath(drop_path)

    def forward(self, x: torch.Tensor, rng: Optional[SeededRng] = None) -> torch.Tensor:
        x = x + self.drop_path(self.attn(layer_norm(x, self.norm1.weight, self.norm1.bias)), rng)
        x = x + self.drop_path(self.mlp(layer_norm(x, self.norm2.weight, self.norm2.bias)), rng)
        return x


class TransformerEncoder(nn.Module):
    """
    Стек блоков с линейно растущей вероятностью drop path (0 → drop_path_rate)
    и итоговой LayerNorm.
    """

    def __init__(self, dim: int, depth: int, num_heads: int, mlp_ratio: float = 4.0,
                 drop_path_rate: float = 0.0, final_norm: bool = True):
        super().__init__()
        rates = torch.linspace(0.0, drop_path_rate, depth).tolist() if depth > 1 else [0.0] * depth
        self.blocks = nn.ModuleList([
            Block(dim, num_heads, mlp_ratio=mlp_ratio, drop_path=rate) for rate in rates
        ])
        self.norm = nn.LayerNorm(dim) if final_norm else None

    def forward(self, x: torch.Tensor, rng: Optional[SeededRng] = None) -> torch.Tensor:
        for block in self.blocks:
            x = block(x, rng)
        if self.norm is not None:
            x = layer_norm(x, self.norm.weight, self.norm.bias)
        return x


def init_weights(module: nn.Module) -> None:
    """Инициализация весов слоев: xavier для Linear, единицы/нули для LayerNorm."""
    for m in module.modules():
        if isinstance(m, nn.Linear):
            nn.init.xavier_uniform_(m.weight)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.LayerNorm):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)
