"""
Главный класс приложения Облако: разбор аргументов и коды выхода.
"""

import argparse
import logging
import sys
from typing import Callable, List, Optional, TextIO

from core import commands
from core.config import PRESETS
from ml.models.image_encoder import AGGREGATION_MODES
from ml.training.datasets import SPLITS
from utilities.errors import (
    ConfigError, ContractError, FormatError, NonFiniteLossError
)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NONFINITE = 4
EXIT_GRADCHECK = commands.EXIT_GRADCHECK_FAILED

Command = Callable[[argparse.Namespace, TextIO], int]


def _add_model_toggles(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Имя пресета или путь к файлу key = value")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="Пресет конфигурации")
    parser.add_argument("--aggregation", choices=AGGREGATION_MODES,
                        help="Агрегация видов: mfa (внимание) или avg (среднее)")
    parser.add_argument("--no-positional-embedding", action="store_true",
                        help="Отключить позиционные эмбеддинги")


def _add_inference_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ckpt", required=True, help="Файл чекпоинта")
    parser.add_argument("--data", required=True, help="Файл датасета")
    parser.add_argument("--views", type=int, help="Число видов V (по умолчанию из конфигурации)")
    parser.add_argument("--seed", type=int, help="Seed семплирования")
    parser.add_argument("--tau", type=float, default=1e-3, help="Порог F-score (квадрат расстояния)")
    # Предсказатель-оракул для тестов: возвращает эталонное облако
    parser.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oblako",
        description="Облако: реконструкция облаков точек по изображениям диффузионной моделью"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="Сгенерировать синтетический датасет")
    gen.add_argument("--spec", help="Типы фигур через запятую (по умолчанию все)")
    gen.add_argument("--count", type=int, required=True, help="Число записей")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="Выходной файл датасета")
    gen.add_argument("--n-points", type=int, default=2048)
    gen.add_argument("--resolution", type=int, default=32)
    gen.set_defaults(handler=commands.cmd_gen_data)

    imp = sub.add_parser("import-clouds", help="Собрать датасет из файлов x y z")
    imp.add_argument("--inputs", nargs="+", required=True)
    imp.add_argument("--out", required=True)
    imp.add_argument("--seed", type=int, default=0)
    imp.add_argument("--n-points", type=int, default=2048)
    imp.add_argument("--resolution", type=int, default=32)
    imp.add_argument("--category", type=int, default=0)
    imp.add_argument("--first-id", type=int, default=0)
    imp.set_defaults(handler=commands.cmd_import_clouds)

    exp = sub.add_parser("export", help="Выгрузить облако и виды записи")
    exp.add_argument("--data", required=True)
    exp.add_argument("--record-id", type=int, required=True)
    exp.add_argument("--out-dir", required=True)
    exp.set_defaults(handler=commands.cmd_export)

    train = sub.add_parser("train", help="Обучить модель")
    _add_model_toggles(train)
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True, help="Каталог чекпоинтов и журнала метрик")
    train.add_argument("--steps", type=int)
    train.add_argument("--views", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--split", choices=SPLITS, default="train")
    train.add_argument("--category", type=int)
    train.add_argument("--resume", help="Продолжить с чекпоинта")
    train.set_defaults(handler=commands.cmd_train)

    sample = sub.add_parser("sample", help="Реконструировать облако записи")
    _add_inference_args(sample)
    sample.add_argument("--record-id", type=int, required=True)
    sample.add_argument("--out", required=True, help="Выходной файл x y z")
    sample.set_defaults(handler=commands.cmd_sample)

    evaluate = sub.add_parser("eval", help="Оценить модель на разбиении")
    _add_inference_args(evaluate)
    evaluate.add_argument("--split", choices=SPLITS, default="test")
    evaluate.add_argument("--category", type=int)
    evaluate.add_argument("--report", help="Сохранить текстовый отчет")
    evaluate.add_argument("--metrics", help="Журнал событий JSON-lines")
    evaluate.set_defaults(handler=commands.cmd_eval)

    grad = sub.add_parser("gradcheck", help="Сравнить autodiff с конечными разностями")
    _add_model_toggles(grad)
    grad.add_argument("--eps", type=float, default=1e-6)
    grad.add_argument("--tolerance", type=float)
    grad.add_argument("--precision", type=int, choices=(32, 64), default=32)
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--views", type=int)
    grad.add_argument("--samples", type=int, default=8, help="Координат на группу")
    grad.set_defaults(handler=commands.cmd_gradcheck)

    return parser


class OblakoApp:
    """Приложение командной строки."""

    def __init__(self, out: Optional[TextIO] = None):
        self.logger = logging.getLogger(__name__)
        self.out = out or sys.stdout
        self.parser = build_parser()

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Выполнение команды; возвращает код выхода."""
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE

        handler: Command = args.handler
        try:
            return handler(args, self.out)
        except (ConfigError, ContractError) as e:
            self.logger.error(f"Некорректные аргументы: {e}")
            return EXIT_USAGE
        except NonFiniteLossError as e:
            self.logger.error(f"Обучение прервано: {e}")
            return EXIT_NONFINITE
        except (FormatError, OSError) as e:
            self.logger.error(f"Ошибка ввода-вывода: {e}")
            return EXIT_IO
        except Exception as e:
            self.logger.critical(f"Непредвиденная ошибка: {e}", exc_info=True)
            return EXIT_UNEXPECTED


def main(argv: Optional[List[str]] = None, out: Optional[TextIO] = None) -> int:
    return OblakoApp(out).run(argv)
