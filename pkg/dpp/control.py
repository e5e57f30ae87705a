"""
Соответствия управлений, функция цены и проверка принципа динамического программирования

На конечных пространствах всякое множество борелевское, поэтому
аналитичность графа соответствия здесь сводится к конечной перечислимости
его значений. Супремум по законам достигается и совпадает с максимумом.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from core.concat import Concatenation, is_tail_map
from core.exceptions import InvariantViolationError, PreconditionError
from core.measures import (
    FiniteMeasure,
    Kernel,
    compatible,
    concat_measure,
    conditional_kernel,
    integrate,
    state_conditional_kernel,
)
from core.pathspace import INFINITY, AnyPath, CheckResult, StateMap, StoppingTime, truncate_at
from core.rng import tag_seed
from core.schemas import DPPReport

logger = logging.getLogger(__name__)

Laws = Tuple[FiniteMeasure, ...]


# ==================== СООТВЕТСТВИЯ ====================

@dataclass(frozen=True)
class ControlCorrespondence:
    """
    P: путь ↦ непустое конечное множество законов.

    При заданных state_map и assign_bar соответствие пропускается через
    состояние: P(ω) = P̄(X(ω)).
    """
    assign: Callable[[AnyPath], Laws]
    name: str = "P"
    state_map: Optional[StateMap] = None
    assign_bar: Optional[Callable[[Any], Laws]] = None

    def __call__(self, omega: AnyPath) -> Laws:
        laws = self.assign(omega)
        if not laws:
            raise InvariantViolationError(
                f"Control correspondence {self.name} is empty at {omega!r}. "
                f"Control correspondences must be non-empty-valued."
            )
        return laws

    @classmethod
    def factored(cls, X: StateMap, assign_bar: Callable[[Any], Laws], name: str = "P") -> "ControlCorrespondence":
        return cls(lambda omega: assign_bar(X(omega)), name=name, state_map=X, assign_bar=assign_bar)

    def law_set(self, omega: AnyPath) -> frozenset:
        return frozenset(self(omega))


@dataclass(frozen=True)
class Selector:
    """ν: ω ↦ закон из P(ω)"""
    choose: Callable[[AnyPath], FiniteMeasure]
    name: str = "selector"

    def __call__(self, omega: AnyPath) -> FiniteMeasure:
        return self.choose(omega)

    def as_kernel(self) -> Kernel:
        return Kernel(self.choose, name=self.name)


def combine(correspondences: Sequence[ControlCorrespondence], mode: str = "intersection") -> ControlCorrespondence:
    """Поточечное объединение или пересечение; пустое пересечение - ошибка при вычислении"""
    if mode not in ("union", "intersection"):
        raise PreconditionError(f"Unknown combine mode {mode!r}; use 'union' or 'intersection'")
    parts = list(correspondences)
    name = ("∪" if mode == "union" else "∩").join(p.name for p in parts)

    def assign(omega: AnyPath) -> Laws:
        if mode == "union":
            return tuple(dict.fromkeys(law for p in parts for law in p(omega)))
        others = [p.law_set(omega) for p in parts[1:]]
        laws = tuple(law for law in parts[0](omega) if all(law in s for s in others))
        if not laws:
            raise InvariantViolationError(f"Intersection {name} is empty at {omega!r}")
        return laws

    return ControlCorrespondence(assign, name=name)


# ==================== ФУНКЦИЯ ЦЕНЫ ====================

def value(P: ControlCorrespondence, G: Callable[[AnyPath], Any], omega: AnyPath) -> Any:
    """v(ω) = max_{μ∈P(ω)} ∫ G dμ"""
    return max(integrate(G, mu) for mu in P(omega))


def _minus_eps(v: Any, eps: Any) -> Any:
    # соглашение +∞ − ε = 1/ε
    if isinstance(v, float) and math.isinf(v) and v > 0:
        return 1 / eps
    return v - eps


def eps_selector(P: ControlCorrespondence, G: Callable[[AnyPath], Any], eps: Any = 0) -> Selector:
    """
    ε-оптимальный селектор: первый по порядку закон с ∫G dμ ≥ v(ω) − ε.

    При ε = 0 выбирается argmax с наименьшим индексом.
    """
    def choose(omega: AnyPath) -> FiniteMeasure:
        laws = P(omega)
        values = [integrate(G, mu) for mu in laws]
        target = max(values)
        if eps:
            target = _minus_eps(target, eps)
        for mu, v in zip(laws, values):
            if v >= target:
                return mu
        return laws[values.index(max(values))]

    return Selector(choose, name=f"eps_argmax[{eps}]")


def selector_family(P: ControlCorrespondence, G: Optional[Callable[[AnyPath], Any]] = None, seed: int = 0) -> List[Selector]:
    """Селекторы для проверок: первый, последний, argmax по G, псевдослучайный"""
    selectors = [
        Selector(lambda omega: P(omega)[0], name="first"),
        Selector(lambda omega: P(omega)[-1], name="last"),
    ]
    if G is not None:
        selectors.append(eps_selector(P, G))

    def random_choice(omega: AnyPath) -> FiniteMeasure:
        laws = P(omega)
        return laws[tag_seed(seed, repr(omega)) % len(laws)]

    selectors.append(Selector(random_choice, name=f"random[{seed}]"))
    return selectors


def _sampled_laws(laws: Laws, max_measures: Optional[int], seed: int, omega: AnyPath) -> Laws:
    if max_measures is None or len(laws) <= max_measures:
        return laws
    step = len(laws) / max_measures
    offset = tag_seed(seed, repr(omega)) % len(laws)
    picks = sorted({(offset + int(i * step)) % len(laws) for i in range(max_measures)})
    return tuple(laws[i] for i in picks)


# ==================== ТРИ КЛЮЧЕВЫХ СВОЙСТВА ====================

def check_concatenable(
    P: ControlCorrespondence,
    c: Concatenation,
    stopping_times: Sequence[StoppingTime],
    sample: Iterable[AnyPath],
    selectors: Optional[Sequence[Selector]] = None,
    max_measures: Optional[int] = None,
    seed: int = 0,
) -> CheckResult:
    """μ ∗_τ ν ∈ P(ω) для μ ∈ P(ω), моментов τ и P-селекторов ν"""
    if selectors is None:
        selectors = selector_family(P, seed=seed)
    checked = 0
    for omega in sample:
        members = P.law_set(omega)
        for i, mu in enumerate(_sampled_laws(P(omega), max_measures, seed, omega)):
            for tau in stopping_times:
                for nu in selectors:
                    kernel = nu.as_kernel()
                    checked += 1
                    comp = compatible(mu, kernel, tau, c)
                    if not comp:
                        return CheckResult(
                            False, (omega, i, tau.name, nu.name),
                            f"selector {nu.name} charges incompatible tails at {tau.name}", checked,
                        )
                    if concat_measure(mu, tau, kernel, c) not in members:
                        return CheckResult(
                            False, (omega, i, tau.name, nu.name),
                            f"mu * nu at {tau.name} with selector {nu.name} leaves P(omega)", checked,
                        )
    return CheckResult(True, checked=checked)


def check_disintegrable(
    P: ControlCorrespondence,
    c: Concatenation,
    stopping_times: Sequence[StoppingTime],
    sample: Sequence[AnyPath],
    conditioning: str = "path",
    X: Optional[StateMap] = None,
    repair: bool = True,
    max_measures: Optional[int] = None,
    seed: int = 0,
) -> CheckResult:
    """
    Для μ ∈ P(ω) и τ условное ядро ν (после исправления на нулевых ячейках)
    является P-селектором и μ = μ ∗_τ ν.

    conditioning="path" группирует по ω_{≤τ}, "state" - по X_τ.
    repair=True заменяет ядро на нулевых ячейках первым законом из P.
    Свойство селектора проверяется на путях выборки и носителя μ.
    """
    if conditioning == "state" and X is None:
        raise PreconditionError("State conditioning needs a state map X")
    fallback = (lambda key: P(key)[0]) if repair else None
    sample = list(sample)
    members: Dict[Any, frozenset] = {}
    checked = 0
    for omega in sample:
        for i, mu in enumerate(_sampled_laws(P(omega), max_measures, seed, omega)):
            for tau in stopping_times:
                checked += 1
                if conditioning == "state":
                    nu = state_conditional_kernel(mu, tau, X, c, fallback=fallback)
                else:
                    nu = conditional_kernel(mu, tau, c, fallback=fallback)
                for path in list(mu.support) + sample:
                    if tau(path) is INFINITY:
                        continue
                    key = truncate_at(path, tau)
                    if key not in members:
                        members[key] = P.law_set(key)
                    if nu(key) not in members[key]:
                        return CheckResult(
                            False, (omega, i, tau.name, key),
                            f"conditional kernel at {tau.name} is not a P-selector", checked,
                        )
                if concat_measure(mu, tau, nu, c) != mu:
                    return CheckResult(
                        False, (omega, i, tau.name),
                        f"mu differs from mu * nu at {tau.name}", checked,
                    )
    return CheckResult(True, checked=checked)


def check_factoring(
    P: ControlCorrespondence,
    G: Callable[[AnyPath], Any],
    X: StateMap,
    sample: Iterable[AnyPath],
) -> CheckResult:
    """v постоянна на слоях X"""
    seen: Dict[Any, Tuple[AnyPath, Any]] = {}
    checked = 0
    for omega in sample:
        checked += 1
        state = X(omega)
        v = value(P, G, omega)
        if state in seen and seen[state][1] != v:
            return CheckResult(False, (seen[state][0], omega), f"v differs on the fibre of {state!r}", checked)
        seen.setdefault(state, (omega, v))
    return CheckResult(True, checked=checked)


# ==================== DPP ====================

def verify_dpp(
    P: ControlCorrespondence,
    G: Callable[[AnyPath], Any],
    tau: StoppingTime,
    omega: AnyPath,
    c: Optional[Concatenation] = None,
    tail_triples: Optional[Iterable[Tuple[AnyPath, Any, AnyPath]]] = None,
    orientation: str = "sup",
    tolerance: Any = 0,
    cache: Optional[Dict[AnyPath, Any]] = None,
) -> DPPReport:
    """
    Обе стороны DPP в точке ω:
    lhs = v(ω), rhs = max_{μ∈P(ω)} ∫ (v∘T_τ 1_{τ<∞} + G 1_{τ=∞}) dμ.

    orientation="inf" решает задачу минимизации как sup для −G.
    """
    if c is not None and tail_triples is not None:
        tail = is_tail_map(G, c, tail_triples)
        if not tail:
            raise PreconditionError(
                f"G is not a tail map for the {c.kind.value} concatenation; "
                f"witness {tail.witness!r}"
            )
    if orientation not in ("sup", "inf"):
        raise PreconditionError(f"Unknown orientation {orientation!r}")
    sign = 1 if orientation == "sup" else -1
    objective = G if sign == 1 else (lambda path: -G(path))
    values: Dict[AnyPath, Any] = {} if cache is None else cache

    def v(path: AnyPath) -> Any:
        if path not in values:
            values[path] = value(P, objective, path)
        return values[path]

    def stopped(path: AnyPath) -> Any:
        t = tau(path)
        if t is INFINITY:
            return objective(path)
        return v(truncate_at(path, tau))

    lhs = v(omega)
    rhs = max(integrate(stopped, mu) for mu in P(omega))
    lhs, rhs = sign * lhs, sign * rhs
    report = DPPReport(
        tau_id=tau.name,
        lhs=lhs,
        rhs=rhs,
        geq=lhs >= rhs - tolerance,
        leq=lhs <= rhs + tolerance,
        orientation=orientation,
    )
    logger.debug(f"DPP at {tau.name}: lhs={lhs} rhs={rhs}")
    return report
