"""
Чекпоинты в детерминированном двоичном формате.

Файл: magic "DFCK", версия u32, длина заголовка u64, JSON-заголовок
(ключи отсортированы), затем байты тензоров в порядке имен. Повторное
сохранение загруженного чекпоинта дает побайтно тот же файл.
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import torch

from core.config import RunConfig, flatten, from_flat
from ml.models import PointCloudReconstructor, build_model
from ml.numerics.rng import SeededRng
from ml.training.optimizers import NamedAdamW
from utilities.errors import CheckpointFormatError

logger = logging.getLogger(__name__)

MAGIC = b"DFCK"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")
_DTYPES = {torch.float32: "<f4", torch.float64: "<f8"}
_NUMPY_DTYPES = {"<f4": torch.float32, "<f8": torch.float64}


@dataclass
class Checkpoint:
    """Содержимое чекпоинта без привязки к живым объектам."""
    config: Dict[str, Any]
    step: int
    rng_state: Dict[str, Any]
    model_tensors: Dict[str, torch.Tensor]
    optimizer_tensors: Dict[str, torch.Tensor]
    optimizer_step: int

    @property
    def run_config(self) -> RunConfig:
        return from_flat(self.config)


def capture(config: RunConfig, step: int, model: torch.nn.Module,
            optimizer: Optional[NamedAdamW], rng: SeededRng) -> Checkpoint:
    return Checkpoint(
        config=flatten(config),
        step=step,
        rng_state=rng.state(),
        model_tensors={k: v.detach().clone() for k, v in model.state_dict().items()},
        optimizer_tensors=optimizer.state_tensors() if optimizer is not None else {},
        optimizer_step=optimizer.step_count if optimizer is not None else 0,
    )


def save_checkpoint(path: Path, ckpt: Checkpoint) -> Path:
    tensors = {f"model/{k}": v for k, v in ckpt.model_tensors.items()}
    tensors.update({f"optim/{k}": v for k, v in ckpt.optimizer_tensors.items()})

    index = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        tensor = tensors[name].detach().cpu()
        if tensor.dtype not in _DTYPES:
            raise CheckpointFormatError(f"Неподдерживаемый тип тензора {name}: {tensor.dtype}")
        dtype = _DTYPES[tensor.dtype]
        data = tensor.contiguous().numpy().astype(dtype).tobytes()
        index.append({"name": name, "dtype": dtype, "shape": list(tensor.shape),
                      "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)

    header = {
        "config": ckpt.config,
        "step": ckpt.step,
        "rng": ckpt.rng_state,
        "optimizer": {"step_count": ckpt.optimizer_step},
        "tensors": index,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)
    logger.info(f"Чекпоинт сохранен: {path} (шаг {ckpt.step})")
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Raises:
        CheckpointFormatError: неверная сигнатура, версия, заголовок или усечение
    """
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CheckpointFormatError(f"Файл чекпоинта слишком короткий: {path}")
    magic, version, header_len = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(f"Неверная сигнатура чекпоинта {magic!r}: {path}")
    if version != VERSION:
        raise CheckpointFormatError(f"Неподдерживаемая версия чекпоинта {version}: {path}")

    body_start = _PREFIX.size + header_len
    try:
        header = json.loads(data[_PREFIX.size:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"Поврежденный заголовок чекпоинта {path}: {e}") from e

    model_tensors: Dict[str, torch.Tensor] = {}
    optimizer_tensors: Dict[str, torch.Tensor] = {}
    try:
        for entry in header["tensors"]:
            start = body_start + entry["offset"]
            end = start + entry["nbytes"]
            if end > len(data):
                raise CheckpointFormatError(f"Чекпоинт обрезан на тензоре {entry['name']}: {path}")
            array = np.frombuffer(data[start:end], dtype=entry["dtype"]).reshape(entry["shape"])
            tensor = torch.from_numpy(array.copy()).to(_NUMPY_DTYPES[entry["dtype"]])
            kind, _, name = entry["name"].partition("/")
            (model_tensors if kind == "model" else optimizer_tensors)[name] = tensor
        ckpt = Checkpoint(
            config=header["config"],
            step=int(header["step"]),
            rng_state=header["rng"],
            model_tensors=model_tensors,
            optimizer_tensors=optimizer_tensors,
            optimizer_step=int(header["optimizer"]["step_count"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointFormatError(f"Некорректная структура чекпоинта {path}: {e}") from e

    logger.debug(f"Чекпоинт загружен: {path} (шаг {ckpt.step})")
    return ckpt


def restore_model(ckpt: Checkpoint, config: Optional[RunConfig] = None) -> PointCloudReconstructor:
    """Модель по снимку конфигурации с весами из чекпоинта."""
    config = config or ckpt.run_config
    dtype = torch.float64 if config.precision == 64 else torch.float32
    model = build_model(config.backbone, config.vision, config.seed, dtype=dtype)
    model.load_state_dict(ckpt.model_tensors)
    return model
