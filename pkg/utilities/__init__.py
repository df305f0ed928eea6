"""
Пакет утилит проекта Облако.
Содержит логирование, загрузку конфигураций и исключения.
"""

from .helpers import load_config, save_config, file_sha256
from .loggers import setup_logging, ContextLogger, MetricsWriter
from .errors import (
    OblakoError, ContractError, ShapeError, ConfigError, FormatError,
    DatasetFormatError, CheckpointFormatError, NonFiniteLossError
)

__all__ = [
    'load_config', 'save_config', 'file_sha256',
    'setup_logging', 'ContextLogger', 'MetricsWriter',
    'OblakoError', 'ContractError', 'ShapeError', 'ConfigError', 'FormatError',
    'DatasetFormatError', 'CheckpointFormatError', 'NonFiniteLossError'
]
