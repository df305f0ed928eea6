"""
Цикл обучения диффузионной модели на облаках точек.
"""

import math
import time
from pathlib import Path
from typing import Callable, List, Optional

import torch

from ml.diffusion import NoiseSchedule, training_loss
from ml.models import PointCloudReconstructor
from ml.numerics import backward
from ml.numerics.rng import SeededRng
from ml.training.datasets import PointCloudDataset, select_views
from ml.training.optimizers import NamedAdamW, adamw_step
from utilities.errors import ContractError, NonFiniteLossError
from utilities.loggers import ContextLogger, MetricsWriter

# (шаг, тренер) → путь сохраненного чекпоинта
CheckpointHook = Callable[[int, "ModelTrainer"], Path]


class ModelTrainer:
    """
    Тренер с x0-предсказанием и потерей Чамфера.

    Все случайные решения шага (состав пакета, виды, t, ε, стартовые
    индексы FPS, маски drop path) берутся из одного SeededRng в
    фиксированном порядке, поэтому траектория воспроизводима и
    продолжается после восстановления из чекпоинта.
    """

    def __init__(self, model: PointCloudReconstructor, optimizer: NamedAdamW,
                 schedule: NoiseSchedule, dataset: PointCloudDataset, rng: SeededRng,
                 batch_size: int, views: int, metrics: Optional[MetricsWriter] = None,
                 log_interval: int = 10, checkpoint_interval: int = 1000,
                 checkpoint_hook: Optional[CheckpointHook] = None, start_step: int = 0):
        if len(dataset) == 0:
            raise ContractError("Пустой набор записей для обучения")
        self.logger = ContextLogger(__name__)
        self.model = model
        self.optimizer = optimizer
        self.schedule = schedule
        self.dataset = dataset
        self.rng = rng
        self.batch_size = batch_size
        self.views = views
        self.metrics = metrics
        self.log_interval = log_interval
        self.checkpoint_interval = checkpoint_interval
        self.checkpoint_hook = checkpoint_hook
        self.step = start_step

        self.history = {'train_loss': []}
        self._dtype = next(model.parameters()).dtype

    def sample_batch(self):
        """Пакет (облака [B, N, 3], виды [B, V, H, W]) с повторами записей."""
        indices = self.rng.integers(0, len(self.dataset), size=self.batch_size)
        records = [self.dataset.records[int(i)] for i in indices]
        clouds = torch.stack([r.cloud for r in records]).to(self._dtype)
        views = torch.stack([select_views(r.views, self.views, self.rng) for r in records])
        return clouds, views.to(self._dtype)

    def train_step(self) -> float:
        """Один шаг: пакет, t, ε, потеря, обратный проход и шаг AdamW."""
        self.model.train()
        self.optimizer.zero_grad()

        clouds, views = self.sample_batch()
        t = torch.from_numpy(self.rng.integers(1, self.schedule.T + 1, size=self.batch_size))
        eps = self.rng.normal(clouds.shape, dtype=self._dtype)

        cond = self.model.encode_views(views)
        loss = training_loss(clouds, t, eps, cond, self.model.predictor(self.rng), self.schedule)

        value = float(loss.item())
        if not math.isfinite(value):
            raise NonFiniteLossError(self.step + 1, value)

        backward(loss)
        adamw_step(self.optimizer)
        self.step += 1
        return value

    def train(self, num_steps: int) -> List[float]:
        """
        Обучение до шага num_steps (глобального, с учетом продолжения).

        Returns:
            Потери выполненных шагов

        Raises:
            NonFiniteLossError: потеря стала NaN/Inf
        """
        started = time.perf_counter()
        losses = []

        if self.step == 0 and self.checkpoint_hook is not None:
            self.checkpoint_hook(0, self)

        while self.step < num_steps:
            loss = self.train_step()
            losses.append(loss)
            self.history['train_loss'].append(loss)

            if self.step % self.log_interval == 0 or self.step == num_steps:
                wallclock = round(time.perf_counter() - started, 3)
                if self.metrics is not None:
                    self.metrics.write("train", step=self.step, loss=loss, wallclock=wallclock)
                self.logger.info("Шаг обучения", step=self.step, loss=f"{loss:.6f}")

            if self.checkpoint_hook is not None and (
                    self.step % self.checkpoint_interval == 0 or self.step == num_steps):
                path = self.checkpoint_hook(self.step, self)
                if self.metrics is not None:
                    self.metrics.write("checkpoint", step=self.step, path=str(path))

        return losses
