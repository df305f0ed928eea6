#!/usr/bin/env python3
"""
Главная точка входа Облака: реконструкция облаков точек по изображениям.
"""

import logging
import sys
from pathlib import Path

# Добавляем корневую директорию в путь для импортов
ROOT_DIR = Path(__file__).parent
sys.path.insert(0, str(ROOT_DIR))

from utilities.loggers import setup_logging


def main() -> int:
    """Основная функция запуска."""
    try:
        setup_logging(ROOT_DIR / 'config' / 'logging.conf')
        logger = logging.getLogger(__name__)
        logger.debug(f"Рабочая директория: {ROOT_DIR}")

        from core.app import main as run_app
        return run_app(sys.argv[1:])

    except Exception as e:
        print(f"Критическая ошибка при запуске: {e}", file=sys.stderr)
        logging.critical("Критическая ошибка при запуске", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
