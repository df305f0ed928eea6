"""
FusionNet: объединение эмбеддингов нескольких видов в один вектор условия.
"""

from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from ml.numerics import matmul, softmax
from utilities.errors import ConfigError, ContractError


class FusionNet(nn.Module):
    """
    Агрегатор видов.

    mfa: внимание с обучаемым запросом q; веса = softmax по видам от
    q·K_vᵀ/√d, выход = W_out · Σ_v w_v · W_val·e_v.
    avg: среднее арифметическое эмбеддингов.

    Перед сверткой виды приводятся к каноническому (лексикографическому)
    порядку, поэтому результат не зависит от порядка видов побитово.
    """

    def __init__(self, embed_dim: int, mode: str = "mfa", num_heads: int = 1):
        super(FusionNet, self).__init__()
        if mode not in ("mfa", "avg"):
            raise ConfigError(f"Неизвестный режим агрегации: {mode}")
        if embed_dim % num_heads != 0:
            raise ConfigError(f"embed_dim={embed_dim} не делится на число голов {num_heads}")

        self.embed_dim = embed_dim
        self.mode = mode
        self.num_heads = num_heads
        self.head_dim = embed_dim // num_heads

        # Проекции без смещения
        self.query = nn.Parameter(torch.zeros(1, embed_dim))
        self.key_projection = nn.Linear(embed_dim, embed_dim, bias=False)
        self.value_projection = nn.Linear(embed_dim, embed_dim, bias=False)
        self.output_projection = nn.Linear(embed_dim, embed_dim, bias=False)

        self._init_weights()
        self._last_weights: Optional[torch.Tensor] = None

        # В режиме avg параметры внимания не участвуют в потере
        if mode == "avg":
            for param in self.parameters():
                param.requires_grad_(False)

    def _init_weights(self):
        """Инициализация весов слоев."""
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.xavier_uniform_(module.weight)
        nn.init.trunc_normal_(self.query, std=0.02)

    @staticmethod
    def canonical_order(embeddings: torch.Tensor) -> torch.Tensor:
        """Переставляет виды [B, V, D] в лексикографическом порядке строк."""
        values = embeddings.detach().cpu().numpy()
        order = np.stack([np.lexsort(values[b].T[::-1]) for b in range(values.shape[0])])
        index = torch.from_numpy(order).to(embeddings.device)
        index = index.unsqueeze(-1).expand(-1, -1, embeddings.shape[-1])
        return torch.gather(embeddings, 1, index)

    def scores(self, embeddings: torch.Tensor) -> torch.Tensor:
        """Веса внимания [B, V, H]; по видам образуют распределение вероятностей."""
        batch, views, _ = embeddings.shape
        keys = self.key_projection(embeddings).reshape(batch, views, self.num_heads, self.head_dim)
        query = self.query.to(embeddings.dtype).reshape(self.num_heads, self.head_dim, 1)
        # [B, H, V, hd] x [H, hd, 1] -> [B, H, V, 1]
        logits = matmul(keys.transpose(1, 2), query).squeeze(-1) / (self.head_dim ** 0.5)
        return softmax(logits, axis=-1).transpose(1, 2)

    def forward(self, embeddings: torch.Tensor) -> torch.Tensor:
        """
        Args:
            embeddings: [V, D] или [B, V, D]

        Returns:
            Эмбеддинг условия [D] или [B, D]
        """
        single = embeddings.dim() == 2
        if single:
            embeddings = embeddings.unsqueeze(0)
        if embeddings.dim() != 3 or embeddings.shape[1] == 0:
            raise ContractError(f"Нужен хотя бы один вид, получена форма {tuple(embeddings.shape)}")
        if embeddings.shape[-1] != self.embed_dim:
            raise ContractError(
                f"Размерность эмбеддингов {embeddings.shape[-1]} не равна {self.embed_dim}"
            )

        ordered = self.canonical_order(embeddings)
        if self.mode == "avg":
            output = ordered.mean(dim=1)
        else:
            batch, views, _ = ordered.shape
            weights = self.scores(ordered)
            self._last_weights = weights.detach()
            values = self.value_projection(ordered).reshape(batch, views, self.num_heads, self.head_dim)
            pooled = (weights.unsqueeze(-1) * values).sum(dim=1).reshape(batch, self.embed_dim)
            output = self.output_projection(pooled)
        return output[0] if single else output

    aggregate_features = forward

    def get_attention_weights(self) -> Optional[torch.Tensor]:
        """Веса внимания последнего прохода (в каноническом порядке видов)."""
        return self._last_weights
