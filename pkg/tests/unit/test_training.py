"""
Модульные тесты цикла обучения и проверки градиентов.
"""

import json
import logging
import math

import pytest
import torch

from ml.diffusion import DiffusionConfig, make_schedule
from ml.models import build_model
from ml.numerics.rng import SeededRng
from ml.training import (
    ModelTrainer, PointCloudDataset, create_optimizer, make_loss_fn, run_gradcheck,
    select_views
)
from ml.training import gradcheck as gradcheck_module
from utilities.errors import ContractError, NonFiniteLossError
from utilities.loggers import MetricsWriter


@pytest.fixture
def schedule():
    return make_schedule(DiffusionConfig(T=10))


@pytest.fixture
def make_trainer(tiny_backbone, tiny_vision, tiny_records, schedule):
    def make(seed=0, metrics=None, hook=None, views=1, log_interval=1):
        model = build_model(tiny_backbone, tiny_vision, seed=0)
        optimizer = create_optimizer(model, lr=1e-3)
        return ModelTrainer(
            model, optimizer, schedule, PointCloudDataset(tiny_records), SeededRng(seed),
            batch_size=2, views=views, metrics=metrics, log_interval=log_interval,
            checkpoint_interval=2, checkpoint_hook=hook
        )
    return make


@pytest.fixture
def tiny_loss_fn(tiny_records, schedule):
    rng = SeededRng(1)
    clouds = torch.stack([r.cloud for r in tiny_records[:2]])
    views = torch.stack([select_views(r.views, 2) for r in tiny_records[:2]])
    t = torch.from_numpy(rng.integers(1, schedule.T + 1, size=2))
    eps = rng.normal(clouds.shape, dtype=torch.float64)
    return make_loss_fn(clouds, views, t, eps, schedule)


class TestModelTrainer:
    """Тесты тренера."""

    def test_losses_are_finite(self, make_trainer):
        trainer = make_trainer()
        losses = trainer.train(3)
        assert len(losses) == 3
        assert all(math.isfinite(v) and v > 0 for v in losses)
        assert trainer.step == 3
        assert trainer.optimizer.step_count == 3

    def test_same_seed_same_trajectory(self, make_trainer):
        assert make_trainer(seed=4).train(3) == make_trainer(seed=4).train(3)

    def test_different_seed_different_trajectory(self, make_trainer):
        assert make_trainer(seed=4).train(2) != make_trainer(seed=5).train(2)

    def test_multi_view_batches(self, make_trainer):
        trainer = make_trainer(views=3)
        clouds, views = trainer.sample_batch()
        assert clouds.shape == (2, 16, 3)
        assert views.shape == (2, 3, 8, 8)

    def test_metrics_and_hooks(self, make_trainer, temp_dir):
        calls = []

        def hook(step, trainer):
            calls.append(step)
            return temp_dir / f"step_{step}.ckpt"

        with MetricsWriter(temp_dir / "metrics.jsonl") as metrics:
            make_trainer(metrics=metrics, hook=hook, log_interval=2).train(3)

        assert calls == [0, 2, 3]
        events = [json.loads(line) for line in (temp_dir / "metrics.jsonl").read_text().splitlines()]
        train_steps = [e["step"] for e in events if e["event"] == "train"]
        assert train_steps == [2, 3]
        assert all({"loss", "wallclock"} <= set(e) for e in events if e["event"] == "train")
        assert [e["step"] for e in events if e["event"] == "checkpoint"] == [2, 3]

    def test_step_log_carries_context(self, make_trainer, caplog):
        with caplog.at_level(logging.INFO, logger="ml.training.trainers"):
            make_trainer().train(1)
        assert any(r.getMessage().startswith("Шаг обучения | step=1 loss=") for r in caplog.records)

    def test_non_finite_loss(self, make_trainer):
        trainer = make_trainer()
        with torch.no_grad():
            trainer.model.denoiser.output_proj.bias.fill_(float("nan"))
        with pytest.raises(NonFiniteLossError) as info:
            trainer.train(2)
        assert info.value.step == 1

    def test_empty_dataset(self, tiny_model, schedule):
        with pytest.raises(ContractError):
            ModelTrainer(tiny_model, create_optimizer(tiny_model), schedule,
                         PointCloudDataset([]), SeededRng(0), batch_size=1, views=1)


class TestGradcheck:
    """Тесты сравнения autodiff с конечными разностями."""

    def test_all_groups_pass(self, tiny_model, tiny_loss_fn):
        report = run_gradcheck(tiny_model, tiny_loss_fn, SeededRng(0))
        assert report.passed
        assert [r.group for r in report.results] == [
            "image_encoder", "aggregator", "patch_encoder", "positional",
            "time_embedding", "transformer", "output_projection"
        ]
        assert all(r.status == "ok" for r in report.results)
        assert report.worst.max_rel_error < 1e-3

    def test_float64_precision(self, tiny_backbone, tiny_vision, tiny_loss_fn):
        model = build_model(tiny_backbone, tiny_vision, seed=0, dtype=torch.float64)
        report = run_gradcheck(model, tiny_loss_fn, SeededRng(0), tolerance=1e-6)
        assert report.passed

    def test_corrupted_gradients_fail(self, tiny_model, tiny_loss_fn, monkeypatch):
        original = gradcheck_module.autodiff_gradients

        def corrupted(model, loss_fn):
            grads = original(model, loss_fn)
            return {name: g * 1.5 if name.startswith("denoiser.time_mlp.") else g
                    for name, g in grads.items()}

        monkeypatch.setattr(gradcheck_module, "autodiff_gradients", corrupted)
        report = run_gradcheck(tiny_model, tiny_loss_fn, SeededRng(0))
        assert not report.passed
        assert report.worst.group == "time_embedding"
        assert report.worst.worst_parameter.startswith("denoiser.time_mlp.")

    def test_disabled_groups_are_skipped(self, tiny_backbone, tiny_vision, tiny_loss_fn):
        from dataclasses import replace

        backbone = replace(tiny_backbone, use_positional_embedding=False)
        vision = replace(tiny_vision, aggregation="avg")
        model = build_model(backbone, vision, seed=0)
        report = run_gradcheck(model, tiny_loss_fn, SeededRng(0))
        status = {r.group: r.status for r in report.results}
        assert status["positional"] == "skipped"
        assert status["aggregator"] == "skipped"
        assert report.passed

    def test_zeroed_bias_gradients_fail(self, tiny_model, tiny_loss_fn, monkeypatch):
        original = gradcheck_module.autodiff_gradients

        def without_bias(model, loss_fn):
            return {name: torch.zeros_like(g) if name.endswith(".bias") else g
                    for name, g in original(model, loss_fn).items()}

        monkeypatch.setattr(gradcheck_module, "autodiff_gradients", without_bias)
        report = run_gradcheck(tiny_model, tiny_loss_fn, SeededRng(0))
        assert not report.passed
        status = {r.group: r.status for r in report.results}
        assert status["output_projection"] == "failed"

    def test_missing_tensor_gradient_fails(self, tiny_model, tiny_loss_fn, monkeypatch):
        original = gradcheck_module.autodiff_gradients

        def dropped(model, loss_fn):
            grads = original(model, loss_fn)
            del grads["denoiser.output_proj.bias"]
            return grads

        monkeypatch.setattr(gradcheck_module, "autodiff_gradients", dropped)
        report = run_gradcheck(tiny_model, tiny_loss_fn, SeededRng(0))
        failed = [r for r in report.results if r.status == "failed"]
        assert [r.group for r in failed] == ["output_projection"]
        assert failed[0].worst_parameter == "denoiser.output_proj.bias"


class TestPickCoordinates:
    """Тесты выбора координат для конечных разностей."""

    def test_every_tensor_is_covered(self):
        sizes = [1000, 3, 1, 50]
        picks = gradcheck_module.pick_coordinates(sizes, SeededRng(0), samples=2)
        assert {owner for owner, _ in picks} == {0, 1, 2, 3}
        assert all(0 <= index < sizes[owner] for owner, index in picks)

    def test_sample_count(self):
        picks = gradcheck_module.pick_coordinates([1000, 10], SeededRng(0), samples=8)
        assert len(picks) == 8
        assert len(set(picks)) == 8

    def test_small_group_is_exhausted(self):
        picks = gradcheck_module.pick_coordinates([2, 1], SeededRng(0), samples=8)
        assert picks == [(0, 0), (0, 1), (1, 0)]

    def test_not_biased_towards_large_gradients(self):
        picks = gradcheck_module.pick_coordinates([10000], SeededRng(3), samples=64)
        indices = [index for _, index in picks]
        assert min(indices) < 2500 and max(indices) > 7500

    def test_reproducible(self):
        sizes = [100, 20, 5]
        assert (gradcheck_module.pick_coordinates(sizes, SeededRng(1), 6)
                == gradcheck_module.pick_coordinates(sizes, SeededRng(1), 6))
