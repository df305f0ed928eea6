"""
Иерархия исключений проекта Облако.

Библиотечный код только выбрасывает исключения, перевод в коды выхода
выполняется в core.app.
"""

from typing import Optional


class OblakoError(Exception):
    """Базовое исключение проекта."""


class ContractError(OblakoError, ValueError):
    """Нарушение предусловия операции."""


class ShapeError(ContractError):
    """Несовместимые размерности тензоров."""


class ConfigError(OblakoError, ValueError):
    """Некорректная или конфликтующая конфигурация."""


class FormatError(OblakoError):
    """Повреждённый или неподдерживаемый файл."""


class DatasetFormatError(FormatError):
    """Ошибка разбора контейнера датасета."""

    def __init__(self, message: str, offset: int, record_index: Optional[int] = None):
        self.offset = offset
        self.record_index = record_index
        location = f"смещение {offset}"
        if record_index is not None:
            location += f", запись {record_index}"
        super().__init__(f"{message} ({location})")


class CheckpointFormatError(FormatError):
    """Ошибка разбора файла чекпоинта."""


class NonFiniteLossError(OblakoError):
    """Функция потерь стала NaN/Inf во время обучения."""

    def __init__(self, step: int, value: float):
        self.step = step
        self.value = value
        super().__init__(f"Нечисловое значение loss={value} на шаге {step}")
