"""
Экспорт и импорт рендеров в формате PGM (P5).
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from utilities.errors import FormatError


def write_pgm(path: Path, image: torch.Tensor) -> None:
    """Запись изображения [H, W] со значениями в [0, 1] как 8-битного PGM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(image.detach().cpu().numpy(), 0.0, 1.0)
    Image.fromarray(np.round(pixels * 255.0).astype(np.uint8)).save(path, format="PPM")


def read_pgm(path: Path) -> torch.Tensor:
    """Чтение PGM в тензор [H, W] float32 в [0, 1]."""
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise FormatError(f"Ожидается одноканальное изображение, режим {img.mode}: {path}")
            pixels = np.asarray(img, dtype=np.float32)
    except (OSError, SyntaxError) as e:
        raise FormatError(f"Не удалось прочитать PGM {path}: {e}") from e
    return torch.from_numpy(pixels / 255.0)
