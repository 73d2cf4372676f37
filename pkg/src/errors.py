"""
Error hierarchy for DelayLab

Имена классов доменных ошибок совпадают с именами, которые CLI печатает в stderr.
"""
from typing import Optional


class DelayLabError(Exception):
    """Базовая ошибка DelayLab"""


class DomainError(DelayLabError):
    """Нарушение режима применимости или идентифицируемости (код выхода 2)"""


class Degenerate(DomainError):
    """Набор данных не позволяет оценить (τ, φ)"""


class NotConverged(DomainError):
    """Локальная оптимизация превысила лимит итераций"""


class OutsideRegime(DomainError):
    """Параметры вне области применимости формулы или оценщика"""


class UndefinedEstimator(DomainError):
    """Аналитический оценщик не определён (корень из неположительного числа)"""


class SingularModel(DomainError):
    """Плотность модели обращается в ноль на отрезке внутри носителя"""


class SingularInformation(DomainError):
    """Матрица Фишера вырождена, параметры совместно неидентифицируемы"""


class UndefinedBound(DomainError):
    """Аналитическая граница не определена (sin φ = 0)"""


class UndefinedBudget(DomainError):
    """Бюджет фотонов не определён при Δω·τ = 0"""


class InsufficientPower(DomainError):
    """Статистическая ошибка не мала по сравнению с ожидаемым систематическим сдвигом"""


class ConfigInvalid(DelayLabError):
    """Некорректная конфигурация кампании (код выхода 1)"""


class DatasetFormatError(DelayLabError):
    """Ошибка разбора файла данных с указанием места"""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        self.message = message
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")
