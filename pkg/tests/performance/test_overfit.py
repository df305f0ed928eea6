"""
Приемочные прогоны на пресете toy: время, переобучение на одной фигуре, абляции.
"""

import time
from io import StringIO

import numpy as np
import pytest
import torch

from core.app import main
from core.config import preset_config
from geometry import chamfer_l1, fps, fscore, knn
from ml.diffusion import make_schedule
from ml.models import build_model
from ml.numerics.rng import SeededRng
from ml.training import ModelTrainer, PointCloudDataset, create_optimizer
from synthetic import generate_dataset


def run(*argv):
    out = StringIO()
    return main(list(argv), out=out), out.getvalue()


def mean_cd_x100(report: str) -> float:
    line = next(l for l in report.splitlines() if l.startswith("mean"))
    return float(line.split("cd_x100=")[1].split()[0])


class TestPerformance:
    """Тесты производительности и приемочные прогоны."""

    def test_geometry_oracles_are_fast(self):
        """200 облаков до 64 точек: FPS, KNN и метрики за 10 секунд."""
        rng = np.random.default_rng(0)
        started = time.perf_counter()
        for _ in range(200):
            n = int(rng.integers(2, 65))
            p = torch.from_numpy(rng.uniform(-1, 1, size=(n, 3)))
            q = torch.from_numpy(rng.uniform(-1, 1, size=(n, 3)))
            fps(p, max(1, n // 4))
            knn(p, q, min(8, n))
            chamfer_l1(p, q)
            fscore(p, q)
        assert time.perf_counter() - started < 10.0

    def test_gradcheck_runtime(self):
        started = time.perf_counter()
        code, output = run("gradcheck")
        assert code == 0, output
        assert time.perf_counter() - started < 120.0

    def test_ten_step_trace_is_bit_identical(self):
        records = generate_dataset(2, seed=0, n_points=256, resolution=32)
        cfg = preset_config("toy")
        traces = []
        for _ in range(2):
            model = build_model(cfg.backbone, cfg.vision, seed=0)
            trainer = ModelTrainer(
                model, create_optimizer(model, lr=cfg.optimizer.lr), make_schedule(cfg.diffusion),
                PointCloudDataset(records), SeededRng(0), batch_size=2, views=1
            )
            traces.append(trainer.train(10))
        assert traces[0] == traces[1]

    @pytest.mark.slow
    @pytest.mark.parametrize("views", ["1", "5"])
    def test_overfit_single_shape(self, tmp_path, views):
        data = tmp_path / "shape.bin"
        assert run("gen-data", "--count", "1", "--spec", "sphere", "--seed", "0",
                   "--n-points", "256", "--out", str(data))[0] == 0

        started = time.perf_counter()
        code, output = run("train", "--config", "toy", "--data", str(data), "--split", "all",
                           "--views", views, "--aggregation", "mfa", "--out", str(tmp_path / "run"))
        assert code == 0, output

        code, report = run("eval", "--ckpt", str(tmp_path / "run" / "last.ckpt"),
                           "--data", str(data), "--split", "all")
        assert code == 0, report
        assert mean_cd_x100(report) < 8.0
        assert time.perf_counter() - started < 600.0

    @pytest.mark.slow
    @pytest.mark.parametrize("toggles", [
        ("--aggregation", "mfa"),
        ("--aggregation", "avg"),
        ("--no-positional-embedding",),
    ])
    def test_ablation_toggles_train(self, tmp_path, toggles):
        data = tmp_path / "shapes.bin"
        assert run("gen-data", "--count", "4", "--seed", "0", "--n-points", "256",
                   "--out", str(data))[0] == 0
        code, output = run("train", "--config", "toy", *toggles, "--data", str(data),
                           "--split", "all", "--steps", "200", "--out", str(tmp_path / "run"))
        assert code == 0, output
        assert "steps=200" in output

    @pytest.mark.slow
    def test_loss_trend_on_four_records(self):
        """Пресет toy, 200 шагов на 4 записях: среднее последних 10 потерь ниже первых 10."""
        records = generate_dataset(4, seed=0, n_points=256, resolution=32)
        cfg = preset_config("toy")
        model = build_model(cfg.backbone, cfg.vision, seed=cfg.seed)
        optimizer = create_optimizer(model, lr=cfg.optimizer.lr, weight_decay=cfg.optimizer.weight_decay)
        trainer = ModelTrainer(
            model, optimizer, make_schedule(cfg.diffusion), PointCloudDataset(records),
            SeededRng(cfg.seed), batch_size=cfg.batch_size, views=cfg.views
        )
        losses = trainer.train(200)
        assert len(losses) == 200
        assert np.mean(losses[-10:]) < np.mean(losses[:10])
