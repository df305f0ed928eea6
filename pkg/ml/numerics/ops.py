"""
Тензорные операции с проверкой контрактов поверх torch.

Арифметика и обратное распространение выполняются torch autograd;
здесь проверяются формы и предусловия, чтобы ошибки называли оба операнда.
"""

import logging
from typing import Optional

import torch
import torch.nn.functional as F

from utilities.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)


def _shape(t: torch.Tensor) -> tuple:
    return tuple(t.shape)


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """
    Матричное произведение (с поддержкой ведущих batch-измерений).

    Args:
        a: Тензор [..., m, n]
        b: Тензор [..., n, p]

    Returns:
        Тензор [..., m, p]

    Raises:
        ShapeError: внутренние размерности не совпадают
    """
    if a.dim() < 2 or b.dim() < 2:
        raise ShapeError(f"matmul ожидает матрицы, получены формы {_shape(a)} и {_shape(b)}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: несовместимые формы {_shape(a)} и {_shape(b)}")
    return torch.matmul(a, b)


def softmax(x: torch.Tensor, axis: int = -1) -> torch.Tensor:
    """Softmax вдоль оси (torch вычитает максимум для устойчивости)."""
    if not -x.dim() <= axis < max(x.dim(), 1):
        raise ContractError(f"softmax: ось {axis} вне диапазона для формы {_shape(x)}")
    return torch.softmax(x, dim=axis)


def layer_norm(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor,
               eps: float = 1e-5) -> torch.Tensor:
    """
    Нормализация по последней оси с аффинным преобразованием.

    Raises:
        ShapeError: gamma/beta не совпадают с длиной нормализуемой оси
    """
    width = x.shape[-1]
    if _shape(gamma) != (width,) or _shape(beta) != (width,):
        raise ShapeError(
            f"layer_norm: gamma {_shape(gamma)} и beta {_shape(beta)} "
            f"не соответствуют оси длины {width}"
        )
    return F.layer_norm(x, (width,), gamma, beta, eps)


def gelu(x: torch.Tensor) -> torch.Tensor:
    """Точная GELU: x·Φ(x) через функцию ошибок."""
    return F.gelu(x, approximate='none')


def backward(loss: torch.Tensor) -> None:
    """
    Обратный проход от скалярной функции потерь.

    Градиенты накапливаются аддитивно, обнулять их должен вызывающий код.

    Raises:
        ContractError: loss не скаляр
    """
    if loss.numel() != 1:
        raise ContractError(f"backward ожидает скаляр, получена форма {_shape(loss)}")
    loss.backward()


def set_deterministic(enabled: bool = True, num_threads: Optional[int] = 1) -> None:
    """
    Строгий детерминированный режим: один поток и фиксированный порядок редукций.
    """
    torch.use_deterministic_algorithms(enabled)
    if enabled and num_threads:
        torch.set_num_threads(num_threads)
    logger.debug(f"Детерминированный режим: {enabled}, потоков: {torch.get_num_threads()}")


def dtype_for(bits: int) -> torch.dtype:
    """float32 для обучения, float64 только для проверки градиентов."""
    if bits == 32:
        return torch.float32
    if bits == 64:
        return torch.float64
    raise ContractError(f"Поддерживается точность 32 или 64 бита, получено {bits}")
