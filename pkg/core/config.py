"""
Конфигурация запуска: пресеты, плоские файлы key = value и переопределения CLI.

Приоритет: пресет → файл → флаги командной строки.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ml.diffusion import DiffusionConfig
from ml.models import BackboneConfig, VisionConfig
from utilities.errors import ConfigError
from utilities.helpers import load_config

logger = logging.getLogger(__name__)

DEFAULT_PRESET = "diffpoint-s"


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 2e-4
    weight_decay: float = 0.03
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class RunConfig:
    """Полная конфигурация запуска."""
    preset: str = DEFAULT_PRESET
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    vision: VisionConfig = field(default_factory=VisionConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch_size: int = 128
    steps: int = 100000
    seed: int = 0
    dataset: str = ""
    views: int = 1
    n_points: int = 2048
    log_interval: int = 10
    checkpoint_interval: int = 1000
    precision: int = 32

    def validate(self) -> "RunConfig":
        try:
            self.diffusion.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        self.backbone.validate()
        self.vision.validate()
        if self.backbone.n_points != self.n_points:
            raise ConfigError(
                f"num_groups·group_size = {self.backbone.n_points} не равно n_points = {self.n_points}"
            )
        if self.vision.num_heads and self.backbone.embed_dim % self.vision.num_heads != 0:
            raise ConfigError(
                f"embed_dim={self.backbone.embed_dim} не делится на vision_heads={self.vision.num_heads}"
            )
        if not 1 <= self.views <= 24:
            raise ConfigError(f"Число видов должно лежать в [1, 24], получено {self.views}")
        if self.batch_size < 1 or self.steps < 0:
            raise ConfigError("batch_size должен быть >= 1, steps >= 0")
        if self.log_interval < 1 or self.checkpoint_interval < 1:
            raise ConfigError("Интервалы логирования и чекпоинтов должны быть >= 1")
        if self.precision not in (32, 64):
            raise ConfigError(f"Точность должна быть 32 или 64, получено {self.precision}")
        if self.optimizer.lr <= 0 or self.optimizer.weight_decay < 0:
            raise ConfigError("lr должен быть > 0, weight_decay >= 0")
        return self


# Плоский ключ → (секция, поле); секция None означает поле RunConfig
FLAT_KEYS: Dict[str, Tuple[Optional[str], str]] = {
    "preset": (None, "preset"),
    "diffusion_steps": ("diffusion", "T"),
    "beta_1": ("diffusion", "beta_1"),
    "beta_T": ("diffusion", "beta_T"),
    "embed_dim": ("backbone", "embed_dim"),
    "depth": ("backbone", "depth"),
    "num_heads": ("backbone", "num_heads"),
    "num_groups": ("backbone", "num_groups"),
    "group_size": ("backbone", "group_size"),
    "drop_path_rate": ("backbone", "drop_path_rate"),
    "use_positional_embedding": ("backbone", "use_positional_embedding"),
    "encoder_channels": ("backbone", "encoder_channels"),
    "pos_hidden": ("backbone", "pos_hidden"),
    "mlp_ratio": ("backbone", "mlp_ratio"),
    "predict_offsets": ("backbone", "predict_offsets"),
    "image_size": ("vision", "image_size"),
    "patch_size": ("vision", "patch_size"),
    "vision_depth": ("vision", "depth"),
    "vision_heads": ("vision", "num_heads"),
    "aggregation": ("vision", "aggregation"),
    "aggregator_heads": ("vision", "aggregator_heads"),
    "lr": ("optimizer", "lr"),
    "weight_decay": ("optimizer", "weight_decay"),
    "adam_beta1": ("optimizer", "beta1"),
    "adam_beta2": ("optimizer", "beta2"),
    "adam_eps": ("optimizer", "eps"),
    "batch_size": (None, "batch_size"),
    "steps": (None, "steps"),
    "seed": (None, "seed"),
    "dataset": (None, "dataset"),
    "views": (None, "views"),
    "n_points": (None, "n_points"),
    "log_interval": (None, "log_interval"),
    "checkpoint_interval": (None, "checkpoint_interval"),
    "precision": (None, "precision"),
}

PRESETS: Dict[str, Dict[str, Any]] = {
    # Одиночный вид, обучение по категориям
    "diffpoint-s": {
        "beta_1": 1e-4, "beta_T": 0.05, "diffusion_steps": 200,
        "embed_dim": 384, "depth": 16, "num_heads": 16,
        "num_groups": 64, "group_size": 32, "n_points": 2048,
        "drop_path_rate": 0.1, "lr": 2e-4, "weight_decay": 0.03,
        "views": 1, "batch_size": 128,
    },
    # Пять видов, все категории
    "diffpoint-m": {
        "beta_1": 1e-4, "beta_T": 0.02, "diffusion_steps": 1000,
        "embed_dim": 512, "depth": 18, "num_heads": 16,
        "num_groups": 64, "group_size": 32, "n_points": 2048,
        "drop_path_rate": 0.1, "lr": 2e-4, "weight_decay": 0.05,
        "views": 5, "batch_size": 128,
    },
    # Пять видов, большой разнородный набор фигур
    "diffpoint-m-all": {
        "beta_1": 1e-4, "beta_T": 0.02, "diffusion_steps": 1000,
        "embed_dim": 512, "depth": 18, "num_heads": 16,
        "num_groups": 64, "group_size": 32, "n_points": 2048,
        "drop_path_rate": 0.1, "lr": 2e-4, "weight_decay": 0.03,
        "views": 5, "batch_size": 128,
    },
    "toy": {
        "beta_1": 1e-4, "beta_T": 0.05, "diffusion_steps": 50,
        "embed_dim": 64, "depth": 4, "num_heads": 4,
        "num_groups": 16, "group_size": 16, "n_points": 256,
        "encoder_channels": [32, 64, 128], "pos_hidden": 64,
        "drop_path_rate": 0.0, "lr": 1e-3, "weight_decay": 0.0,
        "views": 1, "batch_size": 8, "steps": 2000,
        "log_interval": 10, "checkpoint_interval": 500,
    },
}


def _coerce(key: str, value: Any, current: Any) -> Any:
    """Приведение значения к типу поля по умолчанию."""
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"Ключ '{key}' ожидает true/false, получено {value!r}")
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"Ключ '{key}' ожидает целое число, получено {value!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"Ключ '{key}' ожидает число, получено {value!r}")
        return float(value)
    if isinstance(current, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"Ключ '{key}' ожидает список, получено {value!r}")
        return tuple(int(v) for v in value)
    if not isinstance(value, str):
        raise ConfigError(f"Ключ '{key}' ожидает строку, получено {value!r}")
    return value


def apply_values(cfg: RunConfig, values: Mapping[str, Any]) -> RunConfig:
    """Новая конфигурация с плоскими значениями поверх cfg."""
    unknown = sorted(set(values) - set(FLAT_KEYS))
    if unknown:
        raise ConfigError(f"Неизвестные ключи конфигурации: {', '.join(unknown)}")

    sections: Dict[Optional[str], Dict[str, Any]] = {}
    for key, value in values.items():
        section, name = FLAT_KEYS[key]
        target = cfg if section is None else getattr(cfg, section)
        sections.setdefault(section, {})[name] = _coerce(key, value, getattr(target, name))

    top = dict(sections.pop(None, {}))
    for section, changes in sections.items():
        top[section] = dataclasses.replace(getattr(cfg, section), **changes)
    return dataclasses.replace(cfg, **top)


def preset_config(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"Неизвестный пресет '{name}', доступны: {', '.join(PRESETS)}")
    return apply_values(RunConfig(preset=name), PRESETS[name])


def flatten(cfg: RunConfig) -> Dict[str, Any]:
    """Плоский снимок конфигурации (ключи FLAT_KEYS, JSON/TOML-совместимые значения)."""
    snapshot = {}
    for key, (section, name) in FLAT_KEYS.items():
        value = getattr(cfg if section is None else getattr(cfg, section), name)
        snapshot[key] = list(value) if isinstance(value, tuple) else value
    return dict(sorted(snapshot.items()))


def from_flat(values: Mapping[str, Any]) -> RunConfig:
    """Восстановление конфигурации из снимка flatten."""
    base = preset_config(values.get("preset", DEFAULT_PRESET))
    return apply_values(base, values).validate()


def load_run_config(preset: Optional[str] = None, path: Optional[Path] = None,
                    overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Сборка конфигурации запуска.

    Args:
        preset: Имя пресета из командной строки
        path: Файл конфигурации (плоский TOML)
        overrides: Значения флагов командной строки (None пропускаются)

    Raises:
        ConfigError: неизвестный пресет или ключ, конфликт пресетов, неверные значения
    """
    file_values: Dict[str, Any] = load_config(path) if path else {}
    nested = [k for k, v in file_values.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"Файл конфигурации должен быть плоским, найдены секции: {nested}")

    file_preset = file_values.get("preset")
    if preset and file_preset and preset != file_preset:
        raise ConfigError(f"Пресет '{preset}' конфликтует с пресетом файла '{file_preset}'")
    name = preset or file_preset or DEFAULT_PRESET

    cfg = apply_values(preset_config(name), file_values)
    cli_values = {k: v for k, v in (overrides or {}).items() if v is not None}
    cfg = apply_values(cfg, cli_values).validate()
    logger.debug(f"Конфигурация: пресет {cfg.preset}, файл {path}, переопределения {sorted(cli_values)}")
    return cfg
