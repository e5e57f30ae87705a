"""
Пространства путей на конечной сетке времени

Сетка времени, пути четырёх видов (càdlàg-ступенчатые, непрерывные
кусочно-линейные, càglàd-ступенчатые, классы управлений), усечения в
детерминированные моменты и моменты остановки, отображения состояния,
проверки неупреждаемости и CSV-сериализация путей.
"""
import csv
import enum
import io
import json
import logging
import operator
from dataclasses import dataclass, replace
from fractions import Fraction
from numbers import Real
from pathlib import Path as FilePath
from typing import Any, Callable, Iterable, Optional, Sequence, Tuple, Union

from .exceptions import (
    GridMismatchError,
    InfinityArithmeticError,
    UnsupportedKindError,
)

logger = logging.getLogger(__name__)

# Знаменатель для перевода float-времён в точные дроби
TIME_DENOMINATOR_LIMIT = 10 ** 9


# ==================== INFINITY ====================

class _Infinity:
    """Момент «никогда»: больше любой точки сетки, без арифметики"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())

    def __hash__(self) -> int:
        return hash("INFINITY")

    def __eq__(self, other) -> bool:
        return other is self

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True

    def _refuse(self, *args):
        raise InfinityArithmeticError(
            "INFINITY is a sentinel time. "
            "Arithmetic with it is undefined; branch on is_infinite() instead."
        )

    __add__ = __radd__ = __sub__ = __rsub__ = _refuse
    __mul__ = __rmul__ = __truediv__ = __rtruediv__ = _refuse
    __neg__ = __float__ = __int__ = _refuse


INFINITY = _Infinity()

Time = Union[int, Fraction, float, _Infinity]


def is_infinite(t: Any) -> bool:
    return t is INFINITY


def as_fraction(x: Any) -> Fraction:
    """Точное представление времени; float приводится к ближайшей простой дроби"""
    if x is INFINITY:
        raise InfinityArithmeticError("INFINITY has no numeric value")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a time value")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Real):
        return Fraction(float(x)).limit_denominator(TIME_DENOMINATOR_LIMIT)
    raise TypeError(f"Unsupported time value: {x!r}")


def time_min(a: Time, b: Time) -> Time:
    return a if a <= b else b


def time_max(a: Time, b: Time) -> Time:
    return a if a >= b else b


# ==================== ТОЧКИ ПРОСТРАНСТВА E ====================

def _combine(a: Any, b: Any, op: Callable) -> Any:
    if isinstance(a, tuple):
        if not isinstance(b, tuple) or len(a) != len(b):
            raise UnsupportedKindError(f"Points {a!r} and {b!r} have different shapes")
        return tuple(_combine(x, y, op) for x, y in zip(a, b))
    return op(a, b)


def add_points(a: Any, b: Any) -> Any:
    return _combine(a, b, operator.add)


def sub_points(a: Any, b: Any) -> Any:
    return _combine(a, b, operator.sub)


def scale_point(a: Any, c: Any) -> Any:
    if isinstance(a, tuple):
        return tuple(scale_point(x, c) for x in a)
    return a * c


def norm_sq(a: Any) -> Any:
    """Квадрат евклидовой нормы (точный для дробей)"""
    if isinstance(a, tuple):
        return sum((norm_sq(x) for x in a), 0)
    return a * a


def points_le(a: Any, b: Any) -> bool:
    """Покомпонентное a ≤ b"""
    if isinstance(a, tuple):
        return all(points_le(x, y) for x, y in zip(a, b))
    return a <= b


# ==================== СЕТКА ====================

@dataclass(frozen=True)
class TimeGrid:
    """Равномерная сетка t_k = k·step, k = 0..K, K·step = horizon"""
    horizon: Fraction
    step: Fraction = Fraction(1)

    def __post_init__(self):
        horizon = as_fraction(self.horizon)
        step = as_fraction(self.step)
        if step <= 0:
            raise GridMismatchError(f"Grid step must be positive, got {step}")
        if horizon < 0:
            raise GridMismatchError(f"Grid horizon must be nonnegative, got {horizon}")
        if (horizon / step).denominator != 1:
            raise GridMismatchError(
                f"Horizon {horizon} is not an integer multiple of step {step}"
            )
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "step", step)

    @classmethod
    def unit(cls, n_steps: int) -> "TimeGrid":
        """Сетка {0, 1, ..., n_steps}"""
        return cls(Fraction(n_steps), Fraction(1))

    @property
    def n_steps(self) -> int:
        return int(self.horizon / self.step)

    @property
    def size(self) -> int:
        return self.n_steps + 1

    @property
    def points(self) -> Tuple[Fraction, ...]:
        return tuple(k * self.step for k in range(self.size))

    def time(self, k: int) -> Fraction:
        if not 0 <= k <= self.n_steps:
            raise GridMismatchError(f"Index {k} outside grid 0..{self.n_steps}")
        return k * self.step

    def index(self, t: Time) -> int:
        if t is INFINITY:
            raise GridMismatchError("INFINITY has no grid index")
        q = as_fraction(t) / self.step
        if q.denominator != 1 or not 0 <= q <= self.n_steps:
            raise GridMismatchError(
                f"Time {t} is not a point of the grid (step={self.step}, horizon={self.horizon})"
            )
        return int(q)

    def contains(self, t: Time) -> bool:
        if t is INFINITY:
            return False
        q = as_fraction(t) / self.step
        return q.denominator == 1 and 0 <= q <= self.n_steps

    def floor_index(self, t: Time) -> int:
        """Наибольший индекс k с t_k ≤ t (INFINITY и t ≥ horizon дают K)"""
        if t is INFINITY:
            return self.n_steps
        q = as_fraction(t) / self.step
        k = q.numerator // q.denominator
        return max(0, min(int(k), self.n_steps))

    def as_floats(self):
        import numpy as np
        return np.array([float(p) for p in self.points])


# ==================== ПУТИ ====================

class PathKind(str, enum.Enum):
    """Вид регулярности пути"""
    CADLAG_STEP = "cadlag_step"
    CONTINUOUS_PL = "continuous_pl"
    CAGLAD_STEP = "caglad_step"
    CONTROL_CLASS = "control_class"


@dataclass(frozen=True)
class Path:
    """
    Траектория на сетке: одно значение на точку сетки.

    Для CONTROL_CLASS values[k] - метка на ячейке [t_k, t_{k+1}),
    neutral - метка φ⁻¹(0), которой усечение заполняет будущее.
    """
    grid: TimeGrid
    kind: PathKind
    values: Tuple[Any, ...]
    labels: Optional[Tuple[Any, ...]] = None
    neutral: Any = None
    nondecreasing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", PathKind(self.kind))
        values = tuple(self.values)
        object.__setattr__(self, "values", values)
        if len(values) != self.grid.size:
            raise GridMismatchError(
                f"Path has {len(values)} values but the grid has {self.grid.size} points"
            )
        if self.kind is PathKind.CONTROL_CLASS:
            labels = tuple(self.labels) if self.labels is not None else tuple(dict.fromkeys(values))
            neutral = labels[0] if self.neutral is None else self.neutral
            if neutral not in labels:
                labels = labels + (neutral,)
            unknown = set(values) - set(labels)
            if unknown:
                raise UnsupportedKindError(f"Control values {sorted(map(repr, unknown))} are not labels")
            object.__setattr__(self, "labels", labels)
            object.__setattr__(self, "neutral", neutral)
        if self.nondecreasing:
            if self.kind is not PathKind.CAGLAD_STEP:
                raise UnsupportedKindError("Only CaglladStep paths carry the nondecreasing flag")
            for a, b in zip(values, values[1:]):
                if not points_le(a, b):
                    raise UnsupportedKindError(f"Path flagged nondecreasing decreases from {a!r} to {b!r}")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def head(self) -> Any:
        return self.values[0]

    @property
    def terminal(self) -> Any:
        return self.values[-1]

    def value_at(self, t: Time) -> Any:
        """Значение в точке сетки"""
        if t is INFINITY:
            return self.values[-1]
        return self.values[self.grid.index(t)]

    def at(self, s: Time) -> Any:
        """Значение в произвольный момент s ∈ [0, horizon] по правилу вида пути"""
        if s is INFINITY:
            return self.values[-1]
        s = as_fraction(s)
        if s < 0 or s > self.grid.horizon:
            raise GridMismatchError(f"Time {s} outside [0, {self.grid.horizon}]")
        k = self.grid.floor_index(s)
        on_grid = self.grid.contains(s)
        if on_grid or self.kind in (PathKind.CADLAG_STEP, PathKind.CONTROL_CLASS):
            return self.values[k]
        if self.kind is PathKind.CAGLAD_STEP:
            return self.values[k + 1]
        # кусочно-линейная интерполяция
        w = (s - self.grid.time(k)) / self.grid.step
        delta = sub_points(self.values[k + 1], self.values[k])
        return add_points(self.values[k], scale_point(delta, w))

    def with_values(self, values: Sequence[Any]) -> "Path":
        return replace(self, values=tuple(values))


@dataclass(frozen=True)
class ProductPath:
    """Путь в произведении T-пространств: покомпонентные усечения"""
    components: Tuple[Path, ...]

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise UnsupportedKindError("A product path needs at least one component")
        grid = components[0].grid
        for c in components[1:]:
            if c.grid != grid:
                raise GridMismatchError("Product components live on different grids")
        object.__setattr__(self, "components", components)

    @property
    def grid(self) -> TimeGrid:
        return self.components[0].grid

    @property
    def kind(self) -> Tuple[PathKind, ...]:
        return tuple(c.kind for c in self.components)

    @property
    def values(self) -> Tuple[Tuple[Any, ...], ...]:
        return tuple(zip(*(c.values for c in self.components)))

    @property
    def head(self) -> Tuple[Any, ...]:
        return tuple(c.head for c in self.components)

    @property
    def terminal(self) -> Tuple[Any, ...]:
        return tuple(c.terminal for c in self.components)

    def __len__(self) -> int:
        return self.grid.size

    def component(self, i: int) -> Path:
        return self.components[i]

    def value_at(self, t: Time) -> Tuple[Any, ...]:
        return tuple(c.value_at(t) for c in self.components)

    def at(self, s: Time) -> Tuple[Any, ...]:
        return tuple(c.at(s) for c in self.components)


AnyPath = Union[Path, ProductPath]


def make_path(
    values: Sequence[Any],
    kind: PathKind = PathKind.CADLAG_STEP,
    step: Any = 1,
    **kwargs
) -> Path:
    """Путь на сетке, восстановленной по числу значений и шагу"""
    step = as_fraction(step)
    grid = TimeGrid((len(values) - 1) * step, step)
    return Path(grid, kind, tuple(values), **kwargs)


def product(*paths: AnyPath) -> ProductPath:
    """Произведение путей с одинаковой сеткой (вложенные произведения разворачиваются)"""
    components = []
    for p in paths:
        if isinstance(p, ProductPath):
            components.extend(p.components)
        else:
            components.append(p)
    return ProductPath(tuple(components))


# ==================== УСЕЧЕНИЯ ====================

def truncate(omega: AnyPath, t: Time) -> AnyPath:
    """T_t(ω)(s) = ω(t ∧ s); для классов управлений будущее заполняется нейтральной меткой"""
    if t is INFINITY:
        return omega
    if isinstance(omega, ProductPath):
        return ProductPath(tuple(truncate(c, t) for c in omega.components))
    if isinstance(omega, PathMeasure):
        return measure_path_truncate(omega, t)
    i = omega.grid.index(t)
    values = omega.values
    if omega.kind is PathKind.CONTROL_CLASS:
        truncated = values[:i] + (omega.neutral,) * (len(values) - i)
    else:
        truncated = values[:i + 1] + (values[i],) * (len(values) - i - 1)
    if truncated == values:
        return omega
    return replace(omega, values=truncated)


def truncate_predictable(omega: Path, t: Time) -> Path:
    """Предсказуемое усечение: путь замораживается на левом пределе ω(t−)"""
    if t is INFINITY:
        return omega
    if not isinstance(omega, Path) or omega.kind is not PathKind.CADLAG_STEP:
        raise UnsupportedKindError("Predictable truncation is defined for CadlagStep paths only")
    i = omega.grid.index(t)
    j = max(i - 1, 0)
    values = omega.values
    return replace(omega, values=values[:j + 1] + (values[j],) * (len(values) - j - 1))


# ==================== МОМЕНТЫ ОСТАНОВКИ ====================

@dataclass(frozen=True)
class StoppingTime:
    """Правило ω ↦ момент сетки или INFINITY"""
    rule: Callable[[AnyPath], Time]
    name: str = "tau"

    def __call__(self, omega: AnyPath) -> Time:
        return self.rule(omega)

    @classmethod
    def constant(cls, t: Time) -> "StoppingTime":
        return cls(lambda omega: t, name=f"const:{t}")

    @classmethod
    def never(cls) -> "StoppingTime":
        return cls(lambda omega: INFINITY, name="never")

    @classmethod
    def first_entry(
        cls,
        predicate: Callable[[Any], bool],
        name: str = "entry",
        coordinate: Optional[Callable[[Any], Any]] = None,
    ) -> "StoppingTime":
        """Первый момент сетки, в котором значение пути удовлетворяет predicate"""
        def rule(omega: AnyPath) -> Time:
            for k, value in enumerate(omega.values):
                x = coordinate(value) if coordinate is not None else value
                if predicate(x):
                    return omega.grid.time(k)
            return INFINITY
        return cls(rule, name=name)

    @classmethod
    def hitting(
        cls,
        level: Any,
        coordinate: Optional[Callable[[Any], Any]] = None,
        above: bool = True,
    ) -> "StoppingTime":
        if above:
            return cls.first_entry(lambda x: x >= level, name=f"hit>={level}", coordinate=coordinate)
        return cls.first_entry(lambda x: x <= level, name=f"hit<={level}", coordinate=coordinate)

    @classmethod
    def ball_exit(
        cls,
        center: Any,
        radius: Any,
        cap: Optional[Time] = None,
        coordinate: Optional[Callable[[Any], Any]] = None,
    ) -> "StoppingTime":
        """inf{t : d(center, ω_t) ≥ r} ∧ cap; по умолчанию cap = r"""
        cap = radius if cap is None else cap
        r_sq = radius * radius

        def rule(omega: AnyPath) -> Time:
            limit = omega.grid.floor_index(cap)
            for k, value in enumerate(omega.values[:limit + 1]):
                x = coordinate(value) if coordinate is not None else value
                if norm_sq(sub_points(x, center)) >= r_sq:
                    return omega.grid.time(k)
            return omega.grid.time(limit)
        return cls(rule, name=f"ball_exit:{radius}")

    def minimum(self, other: "StoppingTime") -> "StoppingTime":
        return StoppingTime(lambda omega: time_min(self(omega), other(omega)), name=f"min({self.name},{other.name})")

    def maximum(self, other: "StoppingTime") -> "StoppingTime":
        return StoppingTime(lambda omega: time_max(self(omega), other(omega)), name=f"max({self.name},{other.name})")


def truncate_at(omega: AnyPath, tau: StoppingTime) -> AnyPath:
    """T_τ(ω) = T_{τ(ω)}(ω)"""
    return truncate(omega, tau(omega))


@dataclass(frozen=True)
class StateMap:
    """Отображение состояния X; процесс состояния X_t(ω) = X(T_t ω)"""
    evaluate: Callable[[AnyPath], Any]
    name: str = "X"

    def __call__(self, omega: AnyPath) -> Any:
        return self.evaluate(omega)

    def at(self, omega: AnyPath, t: Time) -> Any:
        return self.evaluate(truncate(omega, t))

    @classmethod
    def current_value(cls) -> "StateMap":
        """X(ω) = значение в последней точке сетки; X_t(ω) = ω(t)"""
        return cls(lambda omega: omega.terminal, name="current")

    @classmethod
    def constant(cls, value: Any = 0) -> "StateMap":
        return cls(lambda omega: value, name="constant")


# ==================== ПРОВЕРКИ ====================

@dataclass(frozen=True)
class CheckResult:
    """Вердикт проверки со свидетелем нарушения"""
    ok: bool
    witness: Any = None
    detail: str = ""
    checked: int = 0

    def __bool__(self) -> bool:
        return self.ok


def is_stopping_time(
    rule: Callable[[AnyPath], Time],
    grid: TimeGrid,
    sample: Iterable[AnyPath],
) -> CheckResult:
    """Свойство Гальмарино: rule(ω) ≤ t ⟺ rule(T_t ω) ≤ t"""
    checked = 0
    for omega in sample:
        for t in grid.points:
            checked += 1
            if (rule(omega) <= t) != (rule(truncate(omega, t)) <= t):
                return CheckResult(False, (omega, t), f"Galmarino property fails at t={t}", checked)
    return CheckResult(True, checked=checked)


def is_F_tau_measurable(
    Z: Callable[[AnyPath], Any],
    tau: StoppingTime,
    sample: Iterable[AnyPath],
) -> CheckResult:
    """Z является F_τ-измеримой ⟺ Z ∘ T_τ = Z"""
    checked = 0
    for omega in sample:
        checked += 1
        if Z(truncate_at(omega, tau)) != Z(omega):
            return CheckResult(False, omega, "Z differs on the truncated path", checked)
    return CheckResult(True, checked=checked)


def is_non_anticipating(
    F: Callable[[AnyPath], AnyPath],
    sample: Iterable[AnyPath],
    target_truncation: Callable[[AnyPath, Time], AnyPath] = truncate,
) -> CheckResult:
    """T̃_t ∘ F ∘ T_t = T̃_t ∘ F в каждой точке сетки"""
    checked = 0
    for omega in sample:
        image = F(omega)
        for t in omega.grid.points:
            checked += 1
            if target_truncation(F(truncate(omega, t)), t) != target_truncation(image, t):
                return CheckResult(False, (omega, t), f"F anticipates at t={t}", checked)
    return CheckResult(True, checked=checked)


# ==================== ПОДПРОСТРАНСТВА ====================

@dataclass(frozen=True)
class Subspace:
    """Предикат принадлежности подпространству путей"""
    name: str
    member: Callable[[Path], bool]

    def __call__(self, omega: Path) -> bool:
        return self.member(omega)


def continuous() -> Subspace:
    def member(omega: Path) -> bool:
        if omega.kind is PathKind.CONTINUOUS_PL:
            return True
        return all(v == omega.values[0] for v in omega.values)
    return Subspace("continuous", member)


def starts_in(start_set: Union[Callable[[Any], bool], Iterable[Any]]) -> Subspace:
    if callable(start_set):
        contains = start_set
    else:
        allowed = frozenset(start_set)
        contains = allowed.__contains__
    return Subspace("start_set", lambda omega: bool(contains(omega.values[0])))


def absorbed_in(closed_set: Callable[[Any], bool]) -> Subspace:
    """После первого попадания в F путь постоянен"""
    def member(omega: Path) -> bool:
        values = omega.values
        for k, v in enumerate(values):
            if closed_set(v):
                return all(w == v for w in values[k:])
        return True
    return Subspace("absorbed", member)


def nondecreasing() -> Subspace:
    return Subspace("nondecreasing", lambda omega: all(points_le(a, b) for a, b in zip(omega.values, omega.values[1:])))


def nonincreasing() -> Subspace:
    return Subspace("nonincreasing", lambda omega: all(points_le(b, a) for a, b in zip(omega.values, omega.values[1:])))


def total_variation(omega: Path) -> Any:
    """Σ_k |ω(t_{k+1}) − ω(t_k)|, покомпонентно (норма l1)"""
    def l1(a: Any) -> Any:
        if isinstance(a, tuple):
            return sum((l1(x) for x in a), 0)
        return abs(a)
    return sum((l1(sub_points(b, a)) for a, b in zip(omega.values, omega.values[1:])), 0)


def finite_variation(bound: Any = None) -> Subspace:
    """
    На конечной сетке вариация конечна у любого числового пути;
    с bound - подпространство путей с вариацией не больше bound.
    """
    if bound is None:
        return Subspace("finite_variation", lambda omega: True)
    return Subspace(f"variation<={bound}", lambda omega: total_variation(omega) <= bound)


def lipschitz(L: Any, x0: Any = None) -> Subspace:
    """Lip^L (и Lip^{L,x0} при заданной начальной точке)"""
    def member(omega: Path) -> bool:
        if x0 is not None and omega.values[0] != x0:
            return False
        bound = (as_fraction(L) * omega.grid.step) ** 2
        for a, b in zip(omega.values, omega.values[1:]):
            d = norm_sq(sub_points(b, a))
            if isinstance(d, float):
                if d > float(bound):
                    return False
            elif d > bound:
                return False
        return True
    return Subspace(f"lipschitz:{L}", member)


def subspace_check(omega: Path, predicate: Subspace, stable: bool = False) -> bool:
    """Принадлежность пути подпространству; stable=True дополнительно проверяет T_t(ω)"""
    if not predicate(omega):
        return False
    if stable:
        return all(predicate(truncate(omega, t)) for t in omega.grid.points)
    return True


# ==================== МЕРОЗНАЧНЫЕ ПУТИ ====================

@dataclass(frozen=True)
class PathMeasure:
    """Дискретная мера на [0, horizon] × E: атомы (время, точка, масса)"""
    grid: TimeGrid
    atoms: Tuple[Tuple[Fraction, Any, Any], ...]

    def __post_init__(self):
        merged = {}
        for time, point, mass in self.atoms:
            time = as_fraction(time)
            if time < 0:
                raise GridMismatchError(f"Atom time {time} is negative")
            if mass == 0:
                continue
            key = (time, point)
            merged[key] = merged.get(key, 0) + mass
        atoms = tuple(
            (time, point, mass)
            for (time, point), mass in sorted(merged.items(), key=lambda item: (item[0][0], repr(item[0][1])))
            if mass != 0
        )
        object.__setattr__(self, "atoms", atoms)

    def total_mass(self, before: Optional[Time] = None) -> Any:
        """μ([0, before) × E); без аргумента - полная масса"""
        if before is None or before is INFINITY:
            return sum((m for _, _, m in self.atoms), 0)
        before = as_fraction(before)
        return sum((m for time, _, m in self.atoms if time < before), 0)


def measure_path_truncate(mu: PathMeasure, t: Time) -> PathMeasure:
    """μ_{≤t}: остаются атомы со временем ≤ t"""
    if t is INFINITY:
        return mu
    t = as_fraction(t)
    return PathMeasure(mu.grid, tuple(a for a in mu.atoms if a[0] <= t))


# ==================== CSV ====================

def _encode_scalar(x: Any) -> str:
    if isinstance(x, bool):
        raise UnsupportedKindError("bool values are not serializable")
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, str):
        return x
    raise UnsupportedKindError(f"Value {x!r} of type {type(x).__name__} is not serializable")


def _decode_scalar(s: str) -> Any:
    if "/" in s:
        num, den = s.split("/", 1)
        try:
            return Fraction(int(num), int(den))
        except ValueError:
            return s
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


# метки управлений хранятся с типом: "0" и 0 - разные метки
_SCALAR_TYPES = {"int": int, "fraction": Fraction, "float": float, "str": str}


def _tag_scalar(x: Any) -> list:
    text = _encode_scalar(x)
    for name, kind in _SCALAR_TYPES.items():
        if type(x) is kind:
            return [name, text]
    raise UnsupportedKindError(f"Label {x!r} of type {type(x).__name__} is not serializable")


def _untag_scalar(tagged: Sequence[str]) -> Any:
    name, text = tagged
    if name == "str":
        return text
    if name == "fraction":
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    if name not in _SCALAR_TYPES:
        raise UnsupportedKindError(f"Unknown scalar type {name!r} in path header")
    return _SCALAR_TYPES[name](text)


def path_to_csv(omega: Path) -> str:
    """
    CSV: строка-заголовок "# {json}" с видом, сеткой и метками,
    затем столбцы k, t_k, v_1..v_d
    """
    if not isinstance(omega, Path):
        raise UnsupportedKindError("Serialize product paths component by component")
    first = omega.values[0]
    dim = len(first) if isinstance(first, tuple) else 1
    header = {
        "kind": omega.kind.value,
        "horizon": _encode_scalar(omega.grid.horizon),
        "step": _encode_scalar(omega.grid.step),
        "dim": dim,
    }
    if omega.kind is PathKind.CONTROL_CLASS:
        cells = [_encode_scalar(label) for label in omega.labels]
        if len(set(cells)) != len(cells):
            raise UnsupportedKindError(f"Labels {omega.labels!r} are not distinguishable in text form")
        header["labels"] = [_tag_scalar(label) for label in omega.labels]
        header["neutral"] = _tag_scalar(omega.neutral)
    if omega.nondecreasing:
        header["nondecreasing"] = True
    buffer = io.StringIO()
    buffer.write("# " + json.dumps(header, ensure_ascii=False) + "\n")
    # текстовые ячейки всегда в кавычках: метки могут содержать разделители и \r
    writer = csv.writer(buffer, lineterminator="\n", quoting=csv.QUOTE_NONNUMERIC)
    writer.writerow(["k", "t_k"] + [f"v_{i + 1}" for i in range(dim)])
    for k, value in enumerate(omega.values):
        components = value if isinstance(value, tuple) else (value,)
        if len(components) != dim or any(isinstance(c, tuple) for c in components):
            raise UnsupportedKindError("Only flat points of constant dimension are serializable")
        writer.writerow([k, _encode_scalar(omega.grid.time(k))] + [_encode_scalar(c) for c in components])
    return buffer.getvalue()


def path_from_csv(text: str) -> Path:
    lines = text.split("\n")
    if not lines or not lines[0].startswith("# "):
        raise UnsupportedKindError("Missing path header line")
    try:
        meta = json.loads(lines[0][2:])
    except json.JSONDecodeError as e:
        raise UnsupportedKindError(f"Malformed path header: {e}") from e
    grid = TimeGrid(_decode_scalar(meta["horizon"]), _decode_scalar(meta["step"]))
    dim = int(meta["dim"])
    kind = PathKind(meta["kind"])
    kwargs = {}
    decode = _decode_scalar
    if kind is PathKind.CONTROL_CLASS:
        labels = tuple(_untag_scalar(tagged) for tagged in meta["labels"])
        by_text = {_encode_scalar(label): label for label in labels}
        decode = by_text.__getitem__
        kwargs = {"labels": labels, "neutral": _untag_scalar(meta["neutral"])}
    if meta.get("nondecreasing"):
        kwargs["nondecreasing"] = True
    values = []
    for row in csv.reader(io.StringIO("\n".join(lines[2:]))):
        if not row:
            continue
        components = tuple(decode(s) for s in row[2:2 + dim])
        values.append(components if dim > 1 else components[0])
    return Path(grid, kind, tuple(values), **kwargs)


def write_path(omega: Path, file_path: Union[str, FilePath]) -> None:
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        f.write(path_to_csv(omega))


def read_path(file_path: Union[str, FilePath]) -> Path:
    with open(file_path, newline="", encoding="utf-8") as f:
        return path_from_csv(f.read())
