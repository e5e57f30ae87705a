"""
Иерархия ошибок библиотеки
"""
from typing import Any, Optional


class TCSpaceError(Exception):
    """Базовая ошибка всех модулей"""


class GridMismatchError(TCSpaceError, ValueError):
    """Время не лежит на сетке или сетки путей различаются"""


class UnsupportedKindError(TCSpaceError, ValueError):
    """Операция не определена для данного вида пути"""


class InfinityArithmeticError(TCSpaceError, TypeError):
    """Арифметика с INFINITY запрещена"""


class CompatibilityError(TCSpaceError, ValueError):
    """Тройка (ω, t, ω′) не лежит в множестве совместимости"""

    def __init__(self, message: str, pair: Optional[Any] = None):
        super().__init__(message)
        self.pair = pair


class PreconditionError(TCSpaceError, ValueError):
    """Нарушено предусловие операции"""


class InvariantViolationError(TCSpaceError):
    """Нарушен инвариант типа (пустое соответствие, ненормированная мера)"""


class EnumerationLimitError(TCSpaceError):
    """Перебор законов превысил лимит max_laws"""


class SimulationError(TCSpaceError):
    """Нечисловое состояние в Монте-Карло"""

    def __init__(self, message: str, seed: Optional[int] = None, path_index: Optional[int] = None):
        super().__init__(message)
        self.seed = seed
        self.path_index = path_index


class CFLError(TCSpaceError, ValueError):
    """Явная схема неустойчива при заданном шаге по времени"""

    def __init__(self, message: str, required_dt: float):
        super().__init__(message)
        self.required_dt = required_dt


class StrategyError(TCSpaceError, ValueError):
    """Стратегия предложила отрицательное приращение управления"""


class UsageError(TCSpaceError):
    """Неверный вызов CLI или неизвестный ключ конфигурации"""
