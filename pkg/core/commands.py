"""
Команды командной строки Облака.

Каждая команда получает разобранные аргументы и поток вывода и возвращает
код выхода; ошибки поднимаются исключениями и переводятся в коды в core.app.
"""

import argparse
import logging
import shutil
from pathlib import Path
from typing import Any, Dict, TextIO

import torch

from core.checkpoint import capture, load_checkpoint, restore_model, save_checkpoint
from core.config import PRESETS, RunConfig, apply_values, flatten, load_run_config
from geometry.metrics import MetricConfig
from geometry.pointcloud import read_cloud_text, write_cloud_text
from ml.diffusion import make_schedule
from ml.inference import InferenceEngine
from ml.models import build_model, count_parameters
from ml.numerics import dtype_for, set_deterministic
from ml.numerics.rng import SeededRng
from ml.training import (
    ModelTrainer, PointCloudDataset, create_optimizer, make_loss_fn, read_dataset,
    run_gradcheck, select_records, select_views, write_dataset
)
from synthetic import KINDS, generate_dataset, import_clouds, write_pgm
from utilities.errors import ConfigError
from utilities.helpers import file_sha256, load_config, save_config
from utilities.loggers import MetricsWriter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_GRADCHECK_FAILED = 5


def _run_config(args: argparse.Namespace, **overrides: Any) -> RunConfig:
    """Конфигурация из --config (имя пресета или путь), --preset и флагов."""
    preset = getattr(args, "preset", None)
    path = None
    config = getattr(args, "config", None)
    if config:
        if config in PRESETS:
            if preset and preset != config:
                raise ConfigError(f"Пресет '{preset}' конфликтует с --config {config}")
            preset = config
        else:
            path = Path(config)
    values = dict(overrides)
    if getattr(args, "aggregation", None):
        values["aggregation"] = args.aggregation
    if getattr(args, "no_positional_embedding", False):
        values["use_positional_embedding"] = False
    return load_run_config(preset=preset, path=path, overrides=values)


def _find_record(records, record_id: int):
    for record in records:
        if record.shape_id == record_id:
            return record
    raise ConfigError(f"Запись с id {record_id} не найдена")


def cmd_gen_data(args: argparse.Namespace, out: TextIO) -> int:
    if args.count < 1:
        raise ConfigError(f"--count должен быть >= 1, получено {args.count}")
    kinds = tuple(k.strip() for k in args.spec.split(",")) if args.spec else KINDS
    unknown = [k for k in kinds if k not in KINDS]
    if unknown:
        raise ConfigError(f"Неизвестные типы фигур: {unknown}, допустимы {KINDS}")

    records = generate_dataset(args.count, args.seed, n_points=args.n_points,
                               resolution=args.resolution, kinds=kinds)
    write_dataset(records, Path(args.out))

    counts: Dict[str, int] = {}
    for record in records:
        counts[KINDS[record.category]] = counts.get(KINDS[record.category], 0) + 1
    summary = " ".join(f"{name}={counts[name]}" for name in sorted(counts))
    out.write(f"records={len(records)} {summary} sha256={file_sha256(Path(args.out))}\n")
    return EXIT_OK


def cmd_import_clouds(args: argparse.Namespace, out: TextIO) -> int:
    clouds = [read_cloud_text(Path(p)) for p in args.inputs]
    records = import_clouds(clouds, args.seed, n_points=args.n_points,
                            resolution=args.resolution, category=args.category,
                            first_id=args.first_id)
    write_dataset(records, Path(args.out))
    out.write(f"records={len(records)} sha256={file_sha256(Path(args.out))}\n")
    return EXIT_OK


def cmd_export(args: argparse.Namespace, out: TextIO) -> int:
    record = _find_record(read_dataset(Path(args.data)), args.record_id)
    out_dir = Path(args.out_dir)
    write_cloud_text(out_dir / f"record_{record.shape_id}.xyz", record.cloud,
                     comment=f"id={record.shape_id} category={record.category}")
    for index, view in enumerate(record.views):
        write_pgm(out_dir / f"record_{record.shape_id}_view_{index:02d}.pgm", view)
    out.write(f"exported={out_dir} views={record.views.shape[0]}\n")
    return EXIT_OK


def _check_resume_flags(args: argparse.Namespace, cfg: RunConfig) -> None:
    """
    Флаги конфигурации при --resume должны совпадать с чекпоинтом.

    Raises:
        ConfigError: флаг задает значение, отличное от сохраненного
    """
    stored = flatten(cfg)
    requested: Dict[str, Any] = {}
    config = getattr(args, "config", None)
    if config in PRESETS:
        requested["preset"] = config
    elif config:
        from_file = flatten(load_run_config(path=Path(config)))
        requested.update({k: from_file[k] for k in load_config(Path(config))
                          if k not in ("steps", "dataset")})
    if args.preset:
        requested["preset"] = args.preset
    for key in ("views", "batch_size", "lr", "seed", "aggregation"):
        value = getattr(args, key, None)
        if value is not None:
            requested[key] = value
    if args.no_positional_embedding:
        requested["use_positional_embedding"] = False

    conflicts = sorted(k for k, v in requested.items() if stored[k] != v)
    if conflicts:
        details = ", ".join(f"{k}: {requested[k]!r} != {stored[k]!r}" for k in conflicts)
        raise ConfigError(f"Флаги расходятся с конфигурацией чекпоинта ({details})")


def cmd_train(args: argparse.Namespace, out: TextIO) -> int:
    set_deterministic(True)
    out_dir = Path(args.out)

    if args.resume:
        ckpt = load_checkpoint(Path(args.resume))
        cfg = ckpt.run_config
        _check_resume_flags(args, cfg)
        if args.steps is not None:
            cfg = apply_values(cfg, {"steps": args.steps}).validate()
    else:
        ckpt = None
        cfg = _run_config(args, steps=args.steps, views=args.views, seed=args.seed,
                          batch_size=args.batch_size, lr=args.lr, dataset=args.data)

    dataset = PointCloudDataset.from_file(Path(args.data), split=args.split, category=args.category)
    if len(dataset) == 0:
        raise ConfigError(f"Разбиение '{args.split}' пусто")

    model = build_model(cfg.backbone, cfg.vision, cfg.seed, dtype=dtype_for(cfg.precision))
    optimizer = create_optimizer(
        model, lr=cfg.optimizer.lr, weight_decay=cfg.optimizer.weight_decay,
        betas=(cfg.optimizer.beta1, cfg.optimizer.beta2), eps=cfg.optimizer.eps
    )
    if ckpt is not None:
        model.load_state_dict(ckpt.model_tensors)
        optimizer.load_state_tensors(ckpt.optimizer_tensors, ckpt.optimizer_step)
        rng = SeededRng.from_state(ckpt.rng_state)
        start_step = ckpt.step
    else:
        rng = SeededRng(cfg.seed)
        start_step = 0

    save_config(out_dir / "config.toml", flatten(cfg))
    out.write(f"parameters={count_parameters(model)} trainable={count_parameters(model, trainable_only=True)}\n")

    def checkpoint_hook(step: int, trainer: ModelTrainer) -> Path:
        path = save_checkpoint(out_dir / f"step_{step:06d}.ckpt",
                               capture(cfg, step, trainer.model, trainer.optimizer, trainer.rng))
        shutil.copyfile(path, out_dir / "last.ckpt")
        return path

    with MetricsWriter(out_dir / "metrics.jsonl") as metrics:
        trainer = ModelTrainer(
            model, optimizer, make_schedule(cfg.diffusion), dataset, rng,
            batch_size=cfg.batch_size, views=cfg.views, metrics=metrics,
            log_interval=cfg.log_interval, checkpoint_interval=cfg.checkpoint_interval,
            checkpoint_hook=checkpoint_hook, start_step=start_step
        )
        losses = trainer.train(cfg.steps)

    if losses:
        out.write(f"steps={trainer.step} final_loss={losses[-1]:.6f}\n")
    else:
        out.write(f"steps={trainer.step}\n")
    return EXIT_OK


def _engine(args: argparse.Namespace):
    ckpt = load_checkpoint(Path(args.ckpt))
    cfg = ckpt.run_config
    views = args.views if args.views is not None else cfg.views
    seed = args.seed if args.seed is not None else cfg.seed
    model = None if args.oracle else restore_model(ckpt, cfg)
    engine = InferenceEngine(model, make_schedule(cfg.diffusion), views=views, seed=seed,
                             metric=MetricConfig(tau=args.tau), oracle=args.oracle)
    return engine, cfg, ckpt


def cmd_sample(args: argparse.Namespace, out: TextIO) -> int:
    set_deterministic(True)
    engine, cfg, _ = _engine(args)
    record = _find_record(read_dataset(Path(args.data)), args.record_id)
    if engine.views > record.views.shape[0]:
        raise ConfigError(f"Запрошено {engine.views} видов, в записи {record.views.shape[0]}")

    cloud = engine.reconstruct(record, engine.record_rng(record))
    write_cloud_text(Path(args.out), cloud, comment=f"id={record.shape_id} seed={engine.seed}")
    scores = engine.score(cloud, record.cloud)
    out.write(f"record={record.shape_id} cd_x100={scores['cd_x100']:.6f} fscore={scores['fscore']:.4f}\n")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, out: TextIO) -> int:
    set_deterministic(True)
    engine, cfg, ckpt = _engine(args)
    records = select_records(read_dataset(Path(args.data)), args.split, args.category)
    if not records:
        raise ConfigError(f"Разбиение '{args.split}' пусто")

    report = engine.evaluate(records, category_names=KINDS)
    metadata = {
        "preset": cfg.preset,
        "aggregation": cfg.vision.aggregation,
        "positional_embedding": cfg.backbone.use_positional_embedding,
        "views": engine.views,
        "tau": args.tau,
        "seed": engine.seed,
        "steps": ckpt.step,
        "split": args.split,
        "oracle": args.oracle,
    }
    text = report.to_text(metadata)
    out.write(text)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")

    if args.metrics:
        with MetricsWriter(Path(args.metrics)) as metrics:
            for row in report.records.to_dict("records"):
                metrics.write("eval_record", record_id=int(row["record_id"]), category=int(row["category"]),
                              cd_x100=float(row["cd_x100"]), fscore=float(row["fscore"]))
            for row in report.categories.to_dict("records"):
                metrics.write("eval_category", category=int(row["category"]), count=int(row["count"]),
                              cd_x100=float(row["cd_x100"]), fscore=float(row["fscore"]))
            metrics.write("eval_mean", **report.mean)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace, out: TextIO) -> int:
    set_deterministic(True)
    if not args.config and not args.preset:
        args.config = "toy"
    cfg = _run_config(args, seed=args.seed, precision=args.precision, views=args.views)
    dtype = dtype_for(cfg.precision)
    tolerance = args.tolerance if args.tolerance is not None else (1e-3 if cfg.precision == 32 else 1e-6)

    records = generate_dataset(2, cfg.seed, n_points=cfg.n_points, resolution=cfg.vision.image_size)
    clouds = torch.stack([r.cloud for r in records])
    views = torch.stack([select_views(r.views, cfg.views) for r in records])

    rng = SeededRng(cfg.seed)
    t = torch.from_numpy(rng.integers(1, cfg.diffusion.T + 1, size=len(records)))
    eps = rng.normal(clouds.shape, dtype=torch.float64)
    loss_fn = make_loss_fn(clouds, views, t, eps, make_schedule(cfg.diffusion))

    model = build_model(cfg.backbone, cfg.vision, cfg.seed, dtype=dtype)
    report = run_gradcheck(model, loss_fn, rng, eps=args.eps, tolerance=tolerance,
                           samples_per_group=args.samples)

    metrics = MetricsWriter(stream=out)
    for result in report.results:
        metrics.write("gradcheck", group=result.group, max_rel_error=result.max_rel_error,
                      status=result.status)

    if not report.passed:
        worst = report.worst
        logger.error(
            f"Проверка градиентов не пройдена: группа {worst.group}, параметр {worst.worst_parameter}, "
            f"ошибка {worst.max_rel_error:.3e} > {tolerance:.1e}"
        )
        out.write(f"FAILED worst={worst.worst_parameter} max_rel_error={worst.max_rel_error:.3e}\n")
        return EXIT_GRADCHECK_FAILED
    out.write(f"OK tolerance={tolerance:.1e}\n")
    return EXIT_OK
