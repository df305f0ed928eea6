"""
Общие фикстуры pytest.
"""

from tests.fixtures.test_config import (  # noqa: F401
    deterministic_torch, temp_dir, tiny_backbone, tiny_vision, tiny_model,
    tiny_records, tiny_dataset_file, random_cloud
)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: долгие приемочные прогоны")
