"""
Датасеты облаков точек с рендерами: двоичный контейнер, разбиение и torch Dataset.

Формат контейнера (little-endian):
    заголовок: magic "DFPT", версия u32, число записей u64
    запись: id u64, категория u16, число точек u32 + тройки float32,
            число видов u8, для каждого вида ширина u16, высота u16 + пиксели float32
"""

import hashlib
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np
import torch
from torch.utils.data import Dataset

from ml.numerics.rng import SeededRng
from utilities.errors import ContractError, DatasetFormatError

MAGIC = b"DFPT"
VERSION = 1
SPLITS = ("train", "val", "test", "all")

_HEADER = struct.Struct("<4sIQ")
_RECORD_HEAD = struct.Struct("<QHI")
_VIEW_COUNT = struct.Struct("<B")
_VIEW_HEAD = struct.Struct("<HH")


@dataclass
class DatasetRecord:
    """Одна фигура: облако [N, 3] и рендеры [V, H, W], оба float32."""
    shape_id: int
    category: int
    cloud: torch.Tensor
    views: torch.Tensor

    def validate(self) -> "DatasetRecord":
        if self.cloud.dim() != 2 or self.cloud.shape[1] != 3:
            raise ContractError(f"Запись {self.shape_id}: облако должно иметь форму [N, 3]")
        if self.views.dim() != 3 or not 1 <= self.views.shape[0] <= 255:
            raise ContractError(f"Запись {self.shape_id}: виды должны иметь форму [V, H, W], 1 <= V <= 255")
        if not 0 <= self.shape_id < 2 ** 64 or not 0 <= self.category < 2 ** 16:
            raise ContractError(f"Запись {self.shape_id}: id или категория вне диапазона")
        return self


def _f32_bytes(tensor: torch.Tensor) -> bytes:
    return tensor.detach().cpu().numpy().astype("<f4").tobytes()


def write_dataset(records: Iterable[DatasetRecord], path: Path) -> int:
    """
    Запись контейнера; записи сохраняются в переданном порядке.

    Returns:
        Число записанных записей
    """
    records = [r.validate() for r in records]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(records)))
        for record in records:
            f.write(_RECORD_HEAD.pack(record.shape_id, record.category, record.cloud.shape[0]))
            f.write(_f32_bytes(record.cloud))
            count, height, width = record.views.shape
            f.write(_VIEW_COUNT.pack(count))
            for view in record.views:
                f.write(_VIEW_HEAD.pack(width, height))
                f.write(_f32_bytes(view))

    logging.getLogger(__name__).info(f"Записано {len(records)} записей в {path}")
    return len(records)


class _Reader:
    """Последовательное чтение буфера с контролем усечения."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0
        self.record_index: Optional[int] = None

    def take(self, size: int) -> int:
        start = self.offset
        if start + size > len(self.data):
            raise DatasetFormatError(
                f"Файл обрезан: нужно {size} байт, доступно {len(self.data) - start}",
                offset=start, record_index=self.record_index
            )
        self.offset += size
        return start

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack_from(self.data, self.take(fmt.size))

    def floats(self, count: int) -> np.ndarray:
        start = self.take(4 * count)
        return np.frombuffer(self.data, dtype="<f4", count=count, offset=start).astype(np.float32)


def read_dataset(path: Path) -> List[DatasetRecord]:
    """
    Чтение контейнера целиком; частичный результат при ошибке не возвращается.

    Raises:
        DatasetFormatError: неверные magic/версия, усечение, лишние байты
    """
    reader = _Reader(Path(path).read_bytes())
    magic, version, count = reader.unpack(_HEADER)
    if magic != MAGIC:
        raise DatasetFormatError(f"Неверная сигнатура {magic!r}, ожидается {MAGIC!r}", offset=0)
    if version != VERSION:
        raise DatasetFormatError(f"Неподдерживаемая версия формата {version}", offset=4)

    records = []
    for index in range(count):
        reader.record_index = index
        shape_id, category, n_points = reader.unpack(_RECORD_HEAD)
        cloud = reader.floats(3 * n_points).reshape(n_points, 3)

        (n_views,) = reader.unpack(_VIEW_COUNT)
        if n_views == 0:
            raise DatasetFormatError("Запись без видов", offset=reader.offset - 1, record_index=index)
        views = []
        for _ in range(n_views):
            view_offset = reader.offset
            width, height = reader.unpack(_VIEW_HEAD)
            if views and views[0].shape != (height, width):
                raise DatasetFormatError(
                    f"Размер вида {width}x{height} отличается от первого вида записи",
                    offset=view_offset, record_index=index
                )
            views.append(reader.floats(width * height).reshape(height, width))

        records.append(DatasetRecord(
            shape_id=shape_id,
            category=category,
            cloud=torch.from_numpy(cloud),
            views=torch.from_numpy(np.stack(views)),
        ))

    if reader.offset != len(reader.data):
        raise DatasetFormatError(
            f"После {count} записей остались лишние байты ({len(reader.data) - reader.offset})",
            offset=reader.offset
        )
    logging.getLogger(__name__).debug(f"Прочитано {count} записей из {path}")
    return records


def split_of(shape_id: int) -> str:
    """Разбиение 70/10/20 по SHA-256 идентификатора фигуры."""
    digest = hashlib.sha256(str(int(shape_id)).encode("ascii")).digest()
    bucket = int.from_bytes(digest[:8], "little") % 100
    if bucket < 70:
        return "train"
    if bucket < 80:
        return "val"
    return "test"


def select_records(records: Iterable[DatasetRecord], split: str = "all",
                   category: Optional[int] = None) -> List[DatasetRecord]:
    if split not in SPLITS:
        raise ContractError(f"Неизвестное разбиение '{split}', допустимы {SPLITS}")
    return [
        r for r in records
        if (split == "all" or split_of(r.shape_id) == split)
        and (category is None or r.category == category)
    ]


def select_views(views: torch.Tensor, count: int, rng: Optional[SeededRng] = None) -> torch.Tensor:
    """
    Подмножество из count видов: случайное без повторов при заданном rng,
    иначе первые count видов (оценка).
    """
    total = views.shape[0]
    if not 1 <= count <= total:
        raise ContractError(f"Нельзя выбрать {count} видов из {total}")
    if rng is None:
        indices = np.arange(count, dtype=np.int64)
    else:
        indices = np.sort(rng.choice(total, size=count, replace=False))
    return views[torch.from_numpy(indices)]


class PointCloudDataset(Dataset):
    """Записи контейнера с фильтром по разбиению и категории."""

    def __init__(self, records: List[DatasetRecord], split: str = "all",
                 category: Optional[int] = None):
        self.logger = logging.getLogger(__name__)
        self.split = split
        self.records = select_records(records, split, category)
        self.logger.info(f"Загружено {len(self.records)} записей для разбиения {split}")

    @classmethod
    def from_file(cls, path: Path, split: str = "all",
                  category: Optional[int] = None) -> "PointCloudDataset":
        return cls(read_dataset(path), split=split, category=category)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, idx: int) -> Dict[str, torch.Tensor]:
        record = self.records[idx]
        return {
            'shape_id': torch.tensor(record.shape_id, dtype=torch.long),
            'category': torch.tensor(record.category, dtype=torch.long),
            'cloud': record.cloud,
            'views': record.views,
        }

    def find(self, shape_id: int) -> Optional[DatasetRecord]:
        for record in self.records:
            if record.shape_id == shape_id:
                return record
        return None

    def category_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for record in self.records:
            counts[record.category] = counts.get(record.category, 0) + 1
        return counts
