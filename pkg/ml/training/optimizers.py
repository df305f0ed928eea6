"""
Оптимизатор AdamW с адресацией параметров по стабильным именам.
"""

import logging
from typing import Dict, Iterable, Tuple

import torch
import torch.optim as optim

from utilities.errors import ContractError


class NamedAdamW:
    """
    Обёртка над torch.optim.AdamW.

    Параметры упорядочены по имени, поэтому состояние в чекпоинте
    не зависит от порядка регистрации модулей. Параметры с
    requires_grad=False (отключённые абляцией) в оптимизацию не входят.
    """

    def __init__(self, named_params: Iterable[Tuple[str, torch.nn.Parameter]],
                 lr: float = 2e-4, weight_decay: float = 0.0,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.logger = logging.getLogger(__name__)
        self.params: Dict[str, torch.nn.Parameter] = {
            name: p for name, p in named_params if p.requires_grad
        }
        self.names = sorted(self.params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.step_count = 0

        # foreach=False: однопоточная реализация с фиксированным порядком
        self.optimizer = optim.AdamW(
            [self.params[name] for name in self.names],
            lr=lr, betas=betas, eps=eps, weight_decay=weight_decay, foreach=False
        )

    def zero_grad(self):
        """Сброс градиентов всех параметров."""
        self.optimizer.zero_grad(set_to_none=True)

    def step(self):
        """
        Один шаг AdamW.

        Raises:
            ContractError: у параметра нет градиента
        """
        for name in self.names:
            if self.params[name].grad is None:
                raise ContractError(f"Нет градиента для параметра '{name}'")
        self.optimizer.step()
        self.step_count += 1

    def state_tensors(self) -> Dict[str, torch.Tensor]:
        """Моменты первого и второго порядка по именам параметров."""
        tensors = {}
        for name in self.names:
            state = self.optimizer.state.get(self.params[name])
            if not state:
                continue
            tensors[f"{name}/exp_avg"] = state['exp_avg'].detach().clone()
            tensors[f"{name}/exp_avg_sq"] = state['exp_avg_sq'].detach().clone()
        return tensors

    def load_state_tensors(self, tensors: Dict[str, torch.Tensor], step_count: int):
        """Восстановление моментов и счётчика шагов."""
        self.step_count = int(step_count)
        for name in self.names:
            key = f"{name}/exp_avg"
            if key not in tensors:
                continue
            param = self.params[name]
            self.optimizer.state[param] = {
                'step': torch.tensor(float(step_count)),
                'exp_avg': tensors[key].to(param.dtype).clone(),
                'exp_avg_sq': tensors[f"{name}/exp_avg_sq"].to(param.dtype).clone(),
            }
        self.logger.debug(f"Состояние AdamW восстановлено, шаг {self.step_count}")


def create_optimizer(model: torch.nn.Module, lr: float = 2e-4,
                     weight_decay: float = 0.0, **kwargs) -> NamedAdamW:
    """
    Создание AdamW для модели по конфигурации.

    Args:
        model: Модель
        lr: Learning rate
        weight_decay: Развязанный коэффициент затухания весов
        **kwargs: betas, eps

    Returns:
        Экземпляр NamedAdamW
    """
    return NamedAdamW(
        model.named_parameters(),
        lr=lr,
        weight_decay=weight_decay,
        betas=kwargs.get('betas', (0.9, 0.999)),
        eps=kwargs.get('eps', 1e-8)
    )


def adamw_step(optimizer: NamedAdamW) -> None:
    """Шаг оптимизатора по уже накопленным градиентам."""
    optimizer.step()
