"""
Конкатенации путей (TC-слой)

Строгая, сдвинутая (adjusted), склейка классов управлений и склейка мер,
конкатенация в момент остановки, операторы сдвига, хвостовые отображения,
проверка TC-морфизмов и расщепление моментов остановки.
"""
import enum
import itertools
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, NamedTuple, Optional, Sequence, Tuple

from .exceptions import CompatibilityError, GridMismatchError, PreconditionError, UnsupportedKindError
from .pathspace import (
    INFINITY,
    AnyPath,
    CheckResult,
    Path,
    PathKind,
    PathMeasure,
    ProductPath,
    StateMap,
    StoppingTime,
    Time,
    add_points,
    as_fraction,
    is_non_anticipating,
    sub_points,
)

logger = logging.getLogger(__name__)


class ConcatKind(str, enum.Enum):
    STRICT = "strict"
    ADJUSTED = "adjusted"
    CONTROL_SPLICE = "control_splice"
    MEASURE_SPLICE = "measure_splice"
    PRODUCT = "product"


def _points_close(a: Any, b: Any, tolerance: float) -> bool:
    if tolerance == 0:
        return a == b
    if isinstance(a, tuple):
        return all(_points_close(x, y, tolerance) for x, y in zip(a, b))
    if isinstance(a, (int, float)) or hasattr(a, "__sub__"):
        try:
            return abs(a - b) <= tolerance
        except TypeError:
            return a == b
    return a == b


@dataclass(frozen=True)
class Concatenation:
    """
    Операция конкатенации ∗ с множеством совместимости.

    Для PRODUCT parts задаёт операцию на каждой компоненте произведения.
    """
    kind: ConcatKind
    tolerance: float = 0.0
    renormalize: bool = False
    parts: Tuple["Concatenation", ...] = ()

    def compat(self, omega: AnyPath, t: Time, omega2: AnyPath) -> bool:
        if t is INFINITY:
            return True
        if self.kind is ConcatKind.PRODUCT:
            return all(
                part.compat(a, t, b)
                for part, a, b in zip(self.parts, omega.components, omega2.components)
            )
        if self.kind is ConcatKind.STRICT:
            return _points_close(omega.value_at(t), omega2.head, self.tolerance)
        return True

    @classmethod
    def product(cls, *parts: "Concatenation") -> "Concatenation":
        return cls(ConcatKind.PRODUCT, parts=tuple(parts))


STRICT = Concatenation(ConcatKind.STRICT)
ADJUSTED = Concatenation(ConcatKind.ADJUSTED)
CONTROL_SPLICE = Concatenation(ConcatKind.CONTROL_SPLICE)
MEASURE_SPLICE = Concatenation(ConcatKind.MEASURE_SPLICE)
MEASURE_SPLICE_RENORMALIZED = Concatenation(ConcatKind.MEASURE_SPLICE, renormalize=True)


# ==================== КОНКАТЕНАЦИЯ ====================

def _splice_measures(mu: PathMeasure, t: Time, nu: PathMeasure, renormalize: bool) -> PathMeasure:
    t = as_fraction(t)
    horizon = mu.grid.horizon
    head = tuple(atom for atom in mu.atoms if atom[0] < t)
    factor = 1 - mu.total_mass(before=t) if renormalize else 1
    tail = tuple(
        (time + t, point, mass * factor)
        for time, point, mass in nu.atoms
        if time + t <= horizon
    )
    return PathMeasure(mu.grid, head + tail)


def concat(omega: AnyPath, t: Time, omega2: AnyPath, c: Concatenation) -> AnyPath:
    """ω ∗_t ω′, обрезанная по общему горизонту"""
    if t is INFINITY:
        return omega
    if omega.grid != omega2.grid:
        raise GridMismatchError("Concatenated paths live on different grids")
    if c.kind is ConcatKind.MEASURE_SPLICE:
        return _splice_measures(omega, t, omega2, c.renormalize)
    if not c.compat(omega, t, omega2):
        raise CompatibilityError(
            f"Paths are not compatible at t={t} under {c.kind.value} concatenation",
            pair=(omega, t, omega2),
        )
    if c.kind is ConcatKind.PRODUCT:
        return ProductPath(tuple(
            concat(a, t, b, part)
            for part, a, b in zip(c.parts, omega.components, omega2.components)
        ))

    i = omega.grid.index(t)
    n = omega.grid.n_steps
    head = omega.values[:i + 1]
    if c.kind is ConcatKind.STRICT:
        values = head + omega2.values[1:n - i + 1]
    elif c.kind is ConcatKind.ADJUSTED:
        base, ref = omega.values[i], omega2.values[0]
        values = head + tuple(add_points(base, sub_points(v, ref)) for v in omega2.values[1:n - i + 1])
    elif c.kind is ConcatKind.CONTROL_SPLICE:
        if omega.kind is not PathKind.CONTROL_CLASS:
            raise UnsupportedKindError("Control splice needs ControlClass paths")
        values = omega.values[:i] + omega2.values[:n + 1 - i]
        labels = omega.labels + tuple(label for label in omega2.labels if label not in omega.labels)
        return replace(omega, values=values, labels=labels)
    else:
        raise UnsupportedKindError(f"Unknown concatenation kind {c.kind}")
    return replace(omega, values=values)


def concat_at(omega: AnyPath, tau: StoppingTime, omega2: AnyPath, c: Concatenation) -> AnyPath:
    """ω ∗_τ ω′ = ω ∗_{τ(ω)} ω′"""
    return concat(omega, tau(omega), omega2, c)


def shift(t: Time, omega: AnyPath, c: Concatenation) -> AnyPath:
    """Канонический левый сдвиг θ_t: ω ∗_t θ_t(ω) = ω; θ_∞ = Id"""
    if t is INFINITY:
        return omega
    if c.kind is ConcatKind.MEASURE_SPLICE:
        t = as_fraction(t)
        return PathMeasure(omega.grid, tuple(
            (time - t, point, mass) for time, point, mass in omega.atoms if time >= t
        ))
    if c.kind is ConcatKind.PRODUCT:
        return ProductPath(tuple(shift(t, a, part) for part, a in zip(c.parts, omega.components)))
    i = omega.grid.index(t)
    if i == 0:
        return omega
    if c.kind is ConcatKind.CONTROL_SPLICE:
        padding = (omega.neutral,) * i
    else:
        padding = (omega.values[-1],) * i
    return replace(omega, values=omega.values[i:] + padding)


def shift_at(tau: StoppingTime, omega: AnyPath, c: Concatenation) -> AnyPath:
    return shift(tau(omega), omega, c)


# ==================== ХВОСТОВЫЕ ОТОБРАЖЕНИЯ И TC-МОРФИЗМЫ ====================

def is_tail_map(
    G: Callable[[AnyPath], Any],
    c: Concatenation,
    triples: Iterable[Tuple[AnyPath, Time, AnyPath]],
) -> CheckResult:
    """G(ω ∗_t ω′) = G(ω′) на совместимых тройках с t < ∞"""
    checked = 0
    for omega, t, omega2 in triples:
        if t is INFINITY or not c.compat(omega, t, omega2):
            continue
        checked += 1
        if G(concat(omega, t, omega2, c)) != G(omega2):
            return CheckResult(False, (omega, t, omega2), "G depends on the head of the path", checked)
    return CheckResult(True, checked=checked)


def is_tc_morphism(
    F: Callable[[AnyPath], Path],
    c: Concatenation,
    sample: Sequence[AnyPath],
    max_pairs: Optional[int] = None,
) -> CheckResult:
    """
    F(ω ∗_t ω′) = F(ω) ⋆_t F(ω′), где ⋆ - сдвинутая конкатенация на D⁰_R.

    Проверяются также F(ω)(0) = 0 и неупреждаемость F.
    """
    sample = list(sample)
    for omega in sample:
        if F(omega).head != 0:
            return CheckResult(False, omega, "F(ω)(0) is not zero")
    anticipation = is_non_anticipating(F, sample)
    if not anticipation:
        return CheckResult(False, anticipation.witness, "F is anticipating", anticipation.checked)

    checked = 0
    pairs = itertools.product(sample, repeat=2)
    if max_pairs is not None:
        pairs = itertools.islice(pairs, max_pairs)
    for omega, omega2 in pairs:
        image, image2 = F(omega), F(omega2)
        for t in omega.grid.points:
            if not c.compat(omega, t, omega2):
                continue
            checked += 1
            if F(concat(omega, t, omega2, c)) != concat(image, t, image2, ADJUSTED):
                return CheckResult(False, (omega, t, omega2), "concatenation equivariance fails", checked)
    return CheckResult(True, checked=checked)


# ==================== МОМЕНТЫ ОСТАНОВКИ НА ХВОСТЕ ====================

def split_stopping_time(
    tau: StoppingTime,
    kappa: StoppingTime,
    omega: AnyPath,
    c: Concatenation,
    sample: Iterable[AnyPath] = (),
) -> StoppingTime:
    """τ′_ω(ω′) = τ(ω ∗_κ ω′) − κ(ω) при κ(ω) < ∞ и совместимом ω′, иначе INFINITY"""
    for x in itertools.chain((omega,), sample):
        if tau(x) < kappa(x):
            raise PreconditionError(
                f"split_stopping_time needs tau >= kappa pointwise; "
                f"tau={tau(x)} < kappa={kappa(x)} on a sampled path"
            )
    k = kappa(omega)

    def rule(omega2: AnyPath) -> Time:
        if k is INFINITY or not c.compat(omega, k, omega2):
            return INFINITY
        s = tau(concat(omega, k, omega2, c))
        if s is INFINITY:
            return INFINITY
        return s - k

    return StoppingTime(rule, name=f"split({tau.name},{kappa.name})")


def compose_shifted_stopping_time(
    kappa: StoppingTime,
    sigma: StoppingTime,
    c: Concatenation,
) -> StoppingTime:
    """τ(ω) = κ(ω) + σ(θ_κ(ω)); сумма за горизонтом считается INFINITY"""
    def rule(omega: AnyPath) -> Time:
        k = kappa(omega)
        if k is INFINITY:
            return INFINITY
        s = sigma(shift(k, omega, c))
        if s is INFINITY:
            return INFINITY
        total = k + s
        if total > omega.grid.horizon:
            return INFINITY
        return total

    return StoppingTime(rule, name=f"{kappa.name}+{sigma.name}∘θ")


# ==================== ФАКТОРИЗАЦИЯ ЧЕРЕЗ СОСТОЯНИЕ ====================

class StateFactoring(NamedTuple):
    factors_through: CheckResult
    is_factor: CheckResult


def factors_through_state(
    c: Concatenation,
    X: StateMap,
    sample: Sequence[AnyPath],
) -> StateFactoring:
    """
    factors_through: X_t(ω) = X_0(ω′) ⟹ (ω, t, ω′) совместимы;
    is_factor: совместимость ⟹ X_t(ω) = X_0(ω′).
    """
    sample = list(sample)
    through_witness = None
    factor_witness = None
    checked = 0
    starts = [X.at(omega2, 0) for omega2 in sample]
    for omega in sample:
        for t in omega.grid.points:
            state = X.at(omega, t)
            for omega2, start in zip(sample, starts):
                checked += 1
                comp = c.compat(omega, t, omega2)
                same = state == start
                if same and not comp and through_witness is None:
                    through_witness = (omega, t, omega2)
                if comp and not same and factor_witness is None:
                    factor_witness = (omega, t, omega2)
    return StateFactoring(
        CheckResult(through_witness is None, through_witness, checked=checked),
        CheckResult(factor_witness is None, factor_witness, checked=checked),
    )
