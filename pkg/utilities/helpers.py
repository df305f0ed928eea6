"""
Вспомогательные функции для проекта Облако.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict

import toml

from utilities.errors import ConfigError


def load_config(config_path: Path) -> Dict[str, Any]:
    """
    Загрузка конфигурации из файла.

    Поддерживаемые форматы: TOML (в том числе плоские строки key = value), JSON.

    Raises:
        ConfigError: файл отсутствует или не разбирается
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise ConfigError(f"Файл конфигурации не найден: {config_path}")

    suffix = config_path.suffix.lower()
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            if suffix == '.json':
                return json.load(f)
            # Всё остальное читается как TOML
            return toml.load(f)
    except (toml.TomlDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Ошибка разбора конфигурации {config_path}: {e}") from e


def save_config(config_path: Path, config: Dict[str, Any]) -> None:
    """
    Сохранение плоской конфигурации в файл.

    Поддерживаемые форматы: TOML, JSON
    """
    config_path = Path(config_path)
    config_path.parent.mkdir(parents=True, exist_ok=True)

    with open(config_path, 'w', encoding='utf-8') as f:
        if config_path.suffix.lower() == '.json':
            json.dump(config, f, indent=2, ensure_ascii=False, sort_keys=True)
        else:
            toml.dump(config, f)


def file_sha256(path: Path, chunk_size: int = 1 << 20) -> str:
    """Контрольная сумма файла (SHA-256, hex)."""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()
