"""
Линейное расписание шума и прямой процесс диффузии.

Шаги t нумеруются с 1; ᾱ_0 = 1 по определению.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import torch

from utilities.errors import ContractError, ShapeError


@dataclass(frozen=True)
class DiffusionConfig:
    """Параметры расписания: число шагов и крайние β."""
    T: int = 200
    beta_1: float = 1e-4
    beta_T: float = 0.05

    def validate(self) -> "DiffusionConfig":
        if self.T < 1:
            raise ContractError(f"T должно быть >= 1, получено {self.T}")
        if not 0.0 < self.beta_1 <= self.beta_T < 1.0:
            raise ContractError(
                f"Требуется 0 < beta_1 <= beta_T < 1, получено beta_1={self.beta_1}, beta_T={self.beta_T}"
            )
        return self


@dataclass(frozen=True)
class NoiseSchedule:
    """Массивы β_t, α_t, ᾱ_t в float64; элемент [t-1] соответствует шагу t."""
    T: int
    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_bars: torch.Tensor

    def check_step(self, t: Union[int, torch.Tensor]) -> None:
        steps = torch.as_tensor(t)
        if steps.numel() == 0 or (steps < 1).any() or (steps > self.T).any():
            raise ContractError(f"Шаг t должен лежать в [1, {self.T}], получено {steps.tolist()}")

    def alpha_bar(self, t: int) -> float:
        """ᾱ_t с соглашением ᾱ_0 = 1."""
        if t == 0:
            return 1.0
        self.check_step(t)
        return float(self.alpha_bars[t - 1])

    def posterior_coefficients(self, t: int) -> Tuple[float, float, float]:
        """
        Коэффициенты апостериорного среднего и дисперсия β̃_t:

            μ = c_x0·x̂⁰ + c_xt·xᵗ,  σ² = (1 - ᾱ_{t-1}) / (1 - ᾱ_t) · β_t
        """
        self.check_step(t)
        beta = float(self.betas[t - 1])
        alpha = float(self.alphas[t - 1])
        ab_t = self.alpha_bar(t)
        ab_prev = self.alpha_bar(t - 1)
        c_x0 = np.sqrt(ab_prev) * beta / (1.0 - ab_t)
        c_xt = np.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab_t)
        variance = (1.0 - ab_prev) / (1.0 - ab_t) * beta
        return float(c_x0), float(c_xt), float(variance)


def make_schedule(cfg: DiffusionConfig) -> NoiseSchedule:
    """
    Линейная интерполяция β между beta_1 и beta_T включительно.

    Raises:
        ContractError: конфигурация нарушает ограничения
    """
    cfg.validate()
    if cfg.T == 1:
        betas = np.array([cfg.beta_1], dtype=np.float64)
    else:
        steps = np.arange(cfg.T, dtype=np.float64)
        betas = cfg.beta_1 + steps / (cfg.T - 1) * (cfg.beta_T - cfg.beta_1)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    return NoiseSchedule(
        T=cfg.T,
        betas=torch.from_numpy(betas),
        alphas=torch.from_numpy(alphas),
        alpha_bars=torch.from_numpy(alpha_bars),
    )


def _per_example(values: torch.Tensor, t: Union[int, torch.Tensor], like: torch.Tensor) -> torch.Tensor:
    steps = torch.as_tensor(t, dtype=torch.long)
    coef = values[steps - 1].to(like.dtype)
    # [B] -> [B, 1, 1] для пакета облаков
    while coef.dim() < like.dim():
        coef = coef.unsqueeze(-1)
    return coef


def q_sample(x0: torch.Tensor, t: Union[int, torch.Tensor], eps: torch.Tensor,
             sched: NoiseSchedule) -> torch.Tensor:
    """
    Прямой процесс: Xᵗ = √ᾱ_t·X⁰ + √(1-ᾱ_t)·ε.

    Args:
        x0: Облако [N, 3] или пакет [B, N, 3]
        t: Шаг (int) или тензор шагов [B]
        eps: Шум той же формы, что x0
        sched: Расписание

    Raises:
        ContractError: t вне [1, T]
        ShapeError: форма шума не совпадает с x0
    """
    sched.check_step(t)
    if eps.shape != x0.shape:
        raise ShapeError(f"q_sample: шум {tuple(eps.shape)} не совпадает с x0 {tuple(x0.shape)}")
    signal = _per_example(torch.sqrt(sched.alpha_bars), t, x0)
    noise = _per_example(torch.sqrt(1.0 - sched.alpha_bars), t, x0)
    return signal * x0 + noise * eps
