"""
Численное ядро: операции с контрактами, autodiff и воспроизводимый ГСЧ.
"""

from .ops import (
    matmul, softmax, layer_norm, gelu, backward,
    set_deterministic, dtype_for
)
from .rng import SeededRng, rng_draw, ALGORITHM

__all__ = [
    'matmul', 'softmax', 'layer_norm', 'gelu', 'backward',
    'set_deterministic', 'dtype_for', 'SeededRng', 'rng_draw', 'ALGORITHM'
]
