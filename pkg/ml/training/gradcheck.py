"""
Проверка градиентов: autodiff против центральных разностей по группам параметров.
"""

import copy
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import torch

from ml.diffusion import NoiseSchedule, training_loss
from ml.models import PARAMETER_GROUPS, PointCloudReconstructor
from ml.numerics import backward
from ml.numerics.rng import SeededRng

logger = logging.getLogger(__name__)

LossFn = Callable[[PointCloudReconstructor], torch.Tensor]

# Масштаб, ниже которого |g_fd| сравнивается абсолютно
ATOL = 1e-3


@dataclass
class GroupResult:
    group: str
    max_rel_error: float
    status: str  # "ok", "failed" или "skipped"
    worst_parameter: str = ""


@dataclass
class GradcheckReport:
    results: List[GroupResult]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(r.status != "failed" for r in self.results)

    @property
    def worst(self) -> Optional[GroupResult]:
        checked = [r for r in self.results if r.status != "skipped"]
        return max(checked, key=lambda r: r.max_rel_error) if checked else None


def make_loss_fn(clouds: torch.Tensor, views: torch.Tensor, t: torch.Tensor,
                 eps: torch.Tensor, sched: NoiseSchedule) -> LossFn:
    """Потеря на фиксированном пакете; приводит входы к типу модели."""
    def loss_fn(model: PointCloudReconstructor) -> torch.Tensor:
        dtype = next(model.parameters()).dtype
        cond = model.encode_views(views.to(dtype))
        return training_loss(clouds.to(dtype), t, eps.to(dtype), cond, model.predictor(), sched)
    return loss_fn


def autodiff_gradients(model: PointCloudReconstructor, loss_fn: LossFn) -> Dict[str, torch.Tensor]:
    model.zero_grad(set_to_none=True)
    backward(loss_fn(model))
    return {
        name: p.grad.detach().clone()
        for name, p in model.named_parameters()
        if p.requires_grad and p.grad is not None
    }


def finite_difference(model64: PointCloudReconstructor, loss_fn: LossFn,
                      name: str, index: int, eps: float) -> float:
    """(L(θ+h) − L(θ−h)) / 2h для одной координаты float64-копии модели."""
    param = dict(model64.named_parameters())[name]
    flat = param.data.view(-1)
    original = flat[index].item()
    with torch.no_grad():
        flat[index] = original + eps
        plus = loss_fn(model64).item()
        flat[index] = original - eps
        minus = loss_fn(model64).item()
        flat[index] = original
    return (plus - minus) / (2.0 * eps)


def pick_coordinates(sizes: List[int], rng: SeededRng,
                     samples: int) -> List[Tuple[int, int]]:
    """
    Координаты (тензор, индекс) группы: по одной равномерно случайной из
    каждого именованного тензора и дополнительные равномерно по всей группе,
    пока не наберется samples.
    """
    picks = {(owner, rng.integers(0, size)) for owner, size in enumerate(sizes)}
    total = sum(sizes)
    extra = min(max(samples - len(picks), 0), total - len(picks))
    offsets = [sum(sizes[:i]) for i in range(len(sizes))]
    while extra > 0:
        flat_index = rng.integers(0, total)
        owner = max(i for i, start in enumerate(offsets) if start <= flat_index)
        coord = (owner, flat_index - offsets[owner])
        if coord not in picks:
            picks.add(coord)
            extra -= 1
    return sorted(picks)


def run_gradcheck(model: PointCloudReconstructor, loss_fn: LossFn, rng: SeededRng,
                  eps: float = 1e-6, tolerance: float = 1e-3,
                  samples_per_group: int = 8, atol: float = ATOL) -> GradcheckReport:
    """
    Сравнение градиентов по всем группам параметров.

    Координаты выбираются равномерно, минимум одна на каждый тензор группы.
    Ошибка группы = max |g_ad − g_fd| / (atol + |g_fd|) по выбранным
    координатам: для крупных градиентов она относительная, для близких к
    нулю абсолютная в масштабе atol. Группы без обучаемых параметров
    (отключенные абляцией) помечаются как skipped.
    """
    model.eval()
    model64 = copy.deepcopy(model).to(torch.float64)
    model64.eval()

    grads = autodiff_gradients(model, loss_fn)
    groups = model.parameter_groups()
    params = dict(model.named_parameters())

    results = []
    for group in PARAMETER_GROUPS:
        names = groups.get(group)
        if not names:
            results.append(GroupResult(group, 0.0, "skipped"))
            logger.info(f"Группа {group}: пропущена (нет обучаемых параметров)")
            continue

        sizes = [params[n].numel() for n in names]
        ad_values, fd_values, owners = [], [], []
        for owner, index in pick_coordinates(sizes, rng, samples_per_group):
            name = names[owner]
            grad = grads.get(name)
            # Отсутствующий градиент считается нулевым и должен совпасть с разностью
            ad_values.append(float(grad.reshape(-1)[index]) if grad is not None else 0.0)
            fd_values.append(finite_difference(model64, loss_fn, name, index, eps))
            owners.append(name)

        ad = torch.tensor(ad_values, dtype=torch.float64)
        fd = torch.tensor(fd_values, dtype=torch.float64)
        errors = (ad - fd).abs() / (atol + fd.abs())
        rel = float(errors.max())
        worst = owners[int(errors.argmax())]
        status = "ok" if rel < tolerance else "failed"
        results.append(GroupResult(group, rel, status, worst))
        logger.info(f"Группа {group}: max_rel_error={rel:.3e} ({status}), координат {len(owners)}")
        logger.debug(f"Группа {group}: худший параметр {worst}")

    return GradcheckReport(results=results, tolerance=tolerance)
