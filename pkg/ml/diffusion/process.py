"""
Функция потерь с предсказанием X⁰ и обратный (предковый) семплер.
"""

import logging
from typing import Callable, Union

import torch
from tqdm import tqdm

from geometry.metrics import chamfer_l1
from ml.diffusion.schedule import NoiseSchedule, q_sample
from ml.numerics.rng import SeededRng
from utilities.errors import ShapeError

logger = logging.getLogger(__name__)

# Предсказатель X⁰: (xᵗ, t, condition) -> x̂⁰
Predictor = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor]


def training_loss(x0: torch.Tensor, t: Union[int, torch.Tensor], eps: torch.Tensor,
                  cond: torch.Tensor, model: Predictor, sched: NoiseSchedule) -> torch.Tensor:
    """
    Потеря Чамфера между предсказанием сети и чистым облаком.

    Для пакета возвращается среднее по примерам.

    Raises:
        ShapeError: предсказание не совпадает по форме с x0
    """
    xt = q_sample(x0, t, eps, sched)
    steps = torch.as_tensor(t, dtype=torch.long)
    x0_hat = model(xt, steps, cond)
    if x0_hat.shape != x0.shape:
        raise ShapeError(f"Предсказание {tuple(x0_hat.shape)} не совпадает с x0 {tuple(x0.shape)}")
    return chamfer_l1(x0_hat, x0).mean()


def p_sample_step(xt: torch.Tensor, x0_hat: torch.Tensor, t: int,
                  sched: NoiseSchedule, rng: SeededRng) -> torch.Tensor:
    """
    Один шаг обратного процесса x_{t-1} = μ + σ·z.

    На шаге t = 1 шум не добавляется и возвращается x̂⁰.
    """
    if xt.shape != x0_hat.shape:
        raise ShapeError(f"xᵗ {tuple(xt.shape)} и x̂⁰ {tuple(x0_hat.shape)} разной формы")
    sched.check_step(t)
    if t == 1:
        return x0_hat.clone()

    c_x0, c_xt, variance = sched.posterior_coefficients(t)
    mean = c_x0 * x0_hat + c_xt * xt
    z = rng.normal(xt.shape, dtype=xt.dtype)
    return mean + (variance ** 0.5) * z


@torch.no_grad()
def sample(model: Predictor, cond: torch.Tensor, n_points: int, sched: NoiseSchedule,
           rng: SeededRng, show_progress: bool = False) -> torch.Tensor:
    """
    Предковое семплирование от X^T ~ N(0, I) до X⁰.

    Args:
        model: Предсказатель X⁰
        cond: Эмбеддинг условия [D] или пакет [B, D]
        n_points: Число точек облака (s·k модели)
        sched: Расписание
        rng: Генератор для начального шума и шумов шагов

    Returns:
        Облако [n_points, 3] или [B, n_points, 3]
    """
    batched = cond.dim() == 2
    shape = (cond.shape[0], n_points, 3) if batched else (n_points, 3)
    x = rng.normal(shape, dtype=cond.dtype)

    steps = range(sched.T, 0, -1)
    for t in tqdm(steps, desc="Семплирование", disable=not show_progress, leave=False):
        t_tensor = torch.full((shape[0],), t, dtype=torch.long) if batched else torch.tensor(t)
        x0_hat = model(x, t_tensor, cond)
        x = p_sample_step(x, x0_hat, t, sched, rng)

    logger.debug(f"Семплирование завершено: {sched.T} шагов, форма {tuple(x.shape)}")
    return x
