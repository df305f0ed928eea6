"""
Воспроизводимый генератор случайных чисел.

Алгоритм: PCG64 из numpy (128-битное состояние, документирован и одинаков
на всех платформах). Нормальные величины: зиккурат numpy standard_normal.
"""

import copy
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import torch

ALGORITHM = "PCG64"


class SeededRng:
    """Единый поток случайности для обучения и семплирования."""

    def __init__(self, seed: int, stream: Optional[int] = None):
        self.seed = int(seed)
        self.stream = stream
        if stream is None:
            bit_generator = np.random.PCG64(self.seed)
        else:
            bit_generator = np.random.PCG64(
                np.random.SeedSequence(self.seed, spawn_key=(int(stream),))
            )
        self._generator = np.random.Generator(bit_generator)

    def child(self, stream: int) -> "SeededRng":
        """Независимый поток, однозначно определяемый (seed, stream)."""
        return SeededRng(self.seed, stream=stream)

    def uniform(self, size: Union[int, Sequence[int], None] = None,
                low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._generator.uniform(low, high, size=size)

    def normal(self, shape: Sequence[int], dtype: torch.dtype = torch.float32) -> torch.Tensor:
        values = self._generator.standard_normal(size=tuple(shape), dtype=np.float64)
        return torch.from_numpy(values).to(dtype)

    def integers(self, low: int, high: int, size: Union[int, Sequence[int], None] = None):
        """Целые числа из [low, high)."""
        values = self._generator.integers(low, high, size=size)
        return int(values) if size is None else values

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._generator.choice(n, size=size, replace=replace)

    def state(self) -> Dict[str, Any]:
        """Состояние генератора в JSON-сериализуемом виде."""
        return {
            'algorithm': ALGORITHM,
            'seed': self.seed,
            'stream': self.stream,
            'bit_generator': copy.deepcopy(self._generator.bit_generator.state),
        }

    def set_state(self, state: Dict[str, Any]) -> None:
        self.seed = int(state['seed'])
        self.stream = state.get('stream')
        self._generator.bit_generator.state = copy.deepcopy(state['bit_generator'])

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "SeededRng":
        rng = cls(state['seed'], stream=state.get('stream'))
        rng.set_state(state)
        return rng


def rng_draw(rng: SeededRng, shape: Sequence[int], distribution: str = "normal",
             dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Выборка равномерных или нормальных чисел в виде тензора."""
    if distribution == "normal":
        return rng.normal(shape, dtype=dtype)
    if distribution == "uniform":
        return torch.from_numpy(rng.uniform(size=tuple(shape))).to(dtype)
    raise ValueError(f"Неизвестное распределение: {distribution}")
