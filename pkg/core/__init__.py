"""
Ядро Облака: конфигурация, чекпоинты и команды командной строки.
"""

__version__ = "1.0.0"
__author__ = "5c0uT"
