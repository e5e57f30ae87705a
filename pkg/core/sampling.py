"""
Случайные пути, моменты остановки и конечные меры для наборов проверок
"""
import logging
from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from .measures import FiniteMeasure
from .pathspace import (
    INFINITY,
    Path,
    PathKind,
    PathMeasure,
    StoppingTime,
    Time,
    TimeGrid,
)

logger = logging.getLogger(__name__)

CONTROL_LABELS = ("idle", "up", "down")


def random_values(gen: np.random.Generator, size: int, low: int = -3, high: int = 3) -> Tuple[int, ...]:
    return tuple(int(v) for v in gen.integers(low, high + 1, size=size))


def random_path(
    gen: np.random.Generator,
    kind: PathKind,
    n_steps: int = 4,
    low: int = -3,
    high: int = 3,
) -> Path:
    """Путь с целыми значениями (точная арифметика) заданного вида"""
    grid = TimeGrid.unit(n_steps)
    if kind is PathKind.CONTROL_CLASS:
        values = tuple(CONTROL_LABELS[int(i)] for i in gen.integers(0, len(CONTROL_LABELS), size=grid.size))
        return Path(grid, kind, values, labels=CONTROL_LABELS)
    if kind is PathKind.CAGLAD_STEP:
        increments = gen.integers(0, 3, size=grid.size)
        increments[0] = 0
        values = tuple(int(v) for v in np.cumsum(increments) + int(gen.integers(0, 2)))
        return Path(grid, kind, values, nondecreasing=True)
    return Path(grid, kind, random_values(gen, grid.size, low, high))


def compatible_tail(gen: np.random.Generator, omega: Path, t: Time, low: int = -3, high: int = 3) -> Path:
    """Путь, начинающийся в ω(t) (для строгой конкатенации)"""
    tail = random_path(gen, omega.kind, omega.grid.n_steps, low, high)
    values = (omega.value_at(t),) + tail.values[1:]
    if omega.kind is PathKind.CAGLAD_STEP:
        start = omega.value_at(t)
        values = tuple(start + v - tail.values[0] for v in tail.values)
    return tail.with_values(values)


def random_time(gen: np.random.Generator, grid: TimeGrid, allow_infinity: bool = False) -> Time:
    k = int(gen.integers(0, grid.size + (1 if allow_infinity else 0)))
    if k == grid.size:
        return INFINITY
    return grid.time(k)


def random_stopping_time(gen: np.random.Generator, grid: TimeGrid, low: int = -3, high: int = 3) -> StoppingTime:
    """Константа, INFINITY, момент достижения уровня или выход из шара"""
    choice = int(gen.integers(0, 5))
    if choice == 0:
        return StoppingTime.constant(random_time(gen, grid))
    if choice == 1:
        return StoppingTime.never()
    level = int(gen.integers(low, high + 1))
    if choice == 2:
        return StoppingTime.hitting(level, above=True)
    if choice == 3:
        return StoppingTime.hitting(level, above=False)
    radius = int(gen.integers(1, 4))
    return StoppingTime.ball_exit(0, radius, cap=grid.horizon)


def random_label_stopping_time(gen: np.random.Generator, grid: TimeGrid) -> StoppingTime:
    """
    Для классов управлений: константа или первый t_{k+1}, для которого
    метка на ячейке [t_k, t_{k+1}) равна выбранной ненейтральной метке.
    """
    if gen.integers(0, 2):
        return StoppingTime.constant(random_time(gen, grid))
    label = CONTROL_LABELS[int(gen.integers(1, len(CONTROL_LABELS)))]

    def rule(omega: Path) -> Time:
        for k, value in enumerate(omega.values[:-1]):
            if value == label:
                return omega.grid.time(k + 1)
        return INFINITY

    return StoppingTime(rule, name=f"after:{label}")


def random_masses(gen: np.random.Generator, n: int, denominator: int = 12) -> List[Fraction]:
    """n положительных дробей со знаменателем denominator·n и суммой 1"""
    weights = [int(w) + 1 for w in gen.integers(0, denominator, size=n)]
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def random_finite_measure(
    gen: np.random.Generator,
    pool: Sequence[Any],
    n_atoms: Optional[int] = None,
) -> FiniteMeasure:
    """Точная мера на случайном подмножестве pool"""
    if n_atoms is None:
        n_atoms = int(gen.integers(1, min(len(pool), 6) + 1))
    picks = gen.choice(len(pool), size=min(n_atoms, len(pool)), replace=False)
    masses = random_masses(gen, len(picks))
    return FiniteMeasure(tuple((pool[int(i)], m) for i, m in zip(sorted(picks), masses)))


def random_path_measure(gen: np.random.Generator, grid: TimeGrid, n_atoms: int = 4) -> PathMeasure:
    """Мерозначный путь с атомами (время, метка, масса); времена могут лежать между узлами"""
    atoms = []
    for _ in range(n_atoms):
        time = Fraction(int(gen.integers(0, 2 * grid.n_steps + 1)), 2) * grid.step
        point = CONTROL_LABELS[int(gen.integers(0, len(CONTROL_LABELS)))]
        atoms.append((time, point, Fraction(int(gen.integers(1, 5)), 10)))
    return PathMeasure(grid, tuple(atoms))
