"""
Фикстуры для тестов Облака: маленькие конфигурации, модели и датасеты.
"""

import pytest
import tempfile
from pathlib import Path

import torch

from ml.models import BackboneConfig, VisionConfig, build_model
from ml.numerics import set_deterministic
from ml.training import write_dataset
from synthetic import generate_dataset


@pytest.fixture(autouse=True)
def deterministic_torch():
    """Детерминированный однопоточный режим torch для каждого теста."""
    set_deterministic(True)
    yield


@pytest.fixture
def temp_dir():
    """Создание временной директории."""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


@pytest.fixture
def tiny_backbone():
    """Денойзер на 4 патча по 4 точки."""
    return BackboneConfig(
        embed_dim=16, depth=2, num_heads=2, num_groups=4, group_size=4,
        drop_path_rate=0.0, encoder_channels=(8, 16, 16), pos_hidden=8
    )


@pytest.fixture
def tiny_vision():
    """Кодировщик изображений 8x8 с патчами 4x4."""
    return VisionConfig(image_size=8, patch_size=4, depth=1, num_heads=2)


@pytest.fixture
def tiny_model(tiny_backbone, tiny_vision):
    model = build_model(tiny_backbone, tiny_vision, seed=0)
    model.eval()
    return model


@pytest.fixture
def tiny_records():
    """Четыре синтетические записи: 16 точек, виды 8x8."""
    return generate_dataset(4, seed=0, n_points=16, resolution=8)


@pytest.fixture
def tiny_dataset_file(temp_dir, tiny_records):
    path = temp_dir / "tiny.bin"
    write_dataset(tiny_records, path)
    return path


@pytest.fixture
def random_cloud():
    """Фабрика случайных облаков с фиксированным seed."""
    def make(n, seed=0, batch=None, dtype=torch.float64):
        generator = torch.Generator().manual_seed(seed)
        shape = (n, 3) if batch is None else (batch, n, 3)
        return torch.rand(shape, generator=generator, dtype=dtype) * 2.0 - 1.0
    return make
