"""
Утилиты для настройки логирования и журнала метрик.
"""

import json
import logging
import logging.config
import os
from pathlib import Path
from typing import Any, Dict, Optional, TextIO

LOG_LEVEL_ENV = "OBLAKO_LOG_LEVEL"


def setup_logging(config_path: Optional[Path] = None,
                  default_level: int = logging.INFO) -> bool:
    """
    Настройка логирования из конфигурационного файла.

    Уровень можно переопределить переменной окружения OBLAKO_LOG_LEVEL.

    Args:
        config_path: Путь к файлу конфигурации
        default_level: Уровень логирования по умолчанию

    Returns:
        bool: True если настройка прошла успешно
    """
    level_name = os.environ.get(LOG_LEVEL_ENV)
    if level_name:
        default_level = logging.getLevelName(level_name.upper())
        if not isinstance(default_level, int):
            default_level = logging.INFO

    try:
        if config_path and config_path.exists():
            logging.config.fileConfig(config_path, disable_existing_loggers=False)
        else:
            # Базовая настройка логирования
            logging.basicConfig(
                level=default_level,
                format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            )
        logging.getLogger().setLevel(default_level)
        return True

    except Exception as e:
        print(f"Ошибка настройки логирования: {e}")
        logging.basicConfig(level=default_level)
        return False


class ContextLogger:
    """Логгер, добавляющий к сообщению контекст вида key=value."""

    def __init__(self, name: str = "oblako"):
        self.logger = logging.getLogger(name)

    def debug(self, message: str, **kwargs):
        self.logger.debug(self._format_message(message, kwargs))

    def info(self, message: str, **kwargs):
        self.logger.info(self._format_message(message, kwargs))

    def warning(self, message: str, **kwargs):
        self.logger.warning(self._format_message(message, kwargs))

    def error(self, message: str, **kwargs):
        self.logger.error(self._format_message(message, kwargs))

    def _format_message(self, message: str, context: dict) -> str:
        if context:
            context_str = " ".join(f"{k}={v}" for k, v in context.items())
            return f"{message} | {context_str}"
        return message


class MetricsWriter:
    """
    Журнал метрик в формате JSON-lines.

    Каждое событие записывается одной строкой JSON с отсортированными ключами.
    Если путь не задан, события пишутся только в переданный поток.
    """

    def __init__(self, path: Optional[Path] = None, stream: Optional[TextIO] = None):
        self.path = Path(path) if path else None
        self.stream = stream
        self._file = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, 'a', encoding='utf-8')

    def write(self, event: str, **fields: Any) -> str:
        """Запись одного события. Возвращает сериализованную строку."""
        record: Dict[str, Any] = {'event': event, **fields}
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        if self._file is not None:
            self._file.write(line + "\n")
            self._file.flush()
        if self.stream is not None:
            self.stream.write(line + "\n")
        return line

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
