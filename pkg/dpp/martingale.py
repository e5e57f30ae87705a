"""
Канонические локальные мартингалы на конечных деревьях

Остановленные функционалы Fⁿ, семейства QStop, точные проверки
мартингальности, характеризация через момент κ и соответствия,
порождённые семейством тестовых функционалов.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from core.concat import STRICT, factors_through_state, is_tail_map, is_tc_morphism
from core.exceptions import InvariantViolationError
from core.measures import FiniteMeasure
from core.pathspace import (
    AnyPath,
    CheckResult,
    Path,
    PathKind,
    StateMap,
    StoppingTime,
    TimeGrid,
    Time,
    is_stopping_time,
    time_max,
    time_min,
    truncate,
)
from core.schemas import MartDPPReport

from .control import ControlCorrespondence, verify_dpp
from .trees import TreeKernel, TreeModel, lattice_kernels, root_node, support_paths, walk_child

logger = logging.getLogger(__name__)

FLOAT_TOLERANCE = 1e-10


# ==================== ТЕСТОВЫЕ ФУНКЦИОНАЛЫ ====================

@dataclass(frozen=True)
class TestFunctional:
    """Неупреждающее F: путь ↦ вещественный càdlàg-путь с F(ω)(0) = 0"""
    apply: Callable[[AnyPath], Path]
    name: str = "F"
    bounds: Optional[Tuple[Any, ...]] = None

    __test__ = False

    def __call__(self, omega: AnyPath) -> Path:
        return self.apply(omega)


def _real_path(grid: TimeGrid, values: Sequence[Any]) -> Path:
    return Path(grid, PathKind.CADLAG_STEP, tuple(values))


def increment_functional(coordinate: Callable[[Any], Any] = lambda node: node.position, name: str = "increment") -> TestFunctional:
    """F(ω)_t = x(ω_t) − x(ω_0)"""
    def apply(omega: AnyPath) -> Path:
        x0 = coordinate(omega.values[0])
        return _real_path(omega.grid, [coordinate(v) - x0 for v in omega.values])
    return TestFunctional(apply, name=name)


def compensated_square(
    coordinate: Callable[[Any], Any] = lambda node: node.position,
    clock: Callable[[Any], Any] = lambda node: node.clock,
    name: str = "compensated_square",
) -> TestFunctional:
    """F(ω)_t = x_t² − x_0² − (clock_t − clock_0); аддитивен относительно склейки"""
    def apply(omega: AnyPath) -> Path:
        first = omega.values[0]
        x0, c0 = coordinate(first), clock(first)
        return _real_path(omega.grid, [
            coordinate(v) ** 2 - x0 ** 2 - (clock(v) - c0) for v in omega.values
        ])
    return TestFunctional(apply, name=name)


def centered_square(
    coordinate: Callable[[Any], Any] = lambda node: node.position,
    clock: Callable[[Any], Any] = lambda node: node.clock,
    name: str = "centered_square",
) -> TestFunctional:
    """F(ω)_t = (x_t − x_0)² − (clock_t − clock_0); не является TC-морфизмом"""
    def apply(omega: AnyPath) -> Path:
        first = omega.values[0]
        x0, c0 = coordinate(first), clock(first)
        return _real_path(omega.grid, [
            (coordinate(v) - x0) ** 2 - (clock(v) - c0) for v in omega.values
        ])
    return TestFunctional(apply, name=name)


def zero_functional() -> TestFunctional:
    return TestFunctional(lambda omega: _real_path(omega.grid, [0] * omega.grid.size), name="zero")


def _n_stopping_time(path: Path, n: int) -> Time:
    # τⁿ = inf{t : |F_t| ≥ n} ∧ n
    grid = path.grid
    cap = grid.floor_index(n)
    for k, v in enumerate(path.values[:cap + 1]):
        if abs(v) >= n:
            return grid.time(k)
    return grid.time(cap)


def stop_functional(F: TestFunctional, n: int) -> TestFunctional:
    """Fⁿ_t = F_{τⁿ∧t}"""
    if n < 1:
        raise InvariantViolationError(f"Localization index must be >= 1, got {n}")

    def apply(omega: AnyPath) -> Path:
        path = F(omega)
        return truncate(path, _n_stopping_time(path, n))

    return TestFunctional(apply, name=f"{F.name}^{n}")


def localization_bound(F: TestFunctional, support: Sequence[AnyPath]) -> int:
    """Число уровней n, после которого Fⁿ = F на носителе"""
    top = 0
    horizon = 0
    for omega in support:
        top = max([top] + [abs(v) for v in F(omega).values])
        horizon = max(horizon, omega.grid.horizon)
    return int(math.ceil(max(top, horizon))) + 1


def local_bounds(F: TestFunctional, support: Sequence[AnyPath], n_max: int) -> Tuple[Any, ...]:
    """M_n = max |Fⁿ| по выборке, n = 1..n_max"""
    return tuple(
        max(abs(v) for omega in support for v in stop_functional(F, n)(omega).values)
        for n in range(1, n_max + 1)
    )


def is_locally_bounded(F: TestFunctional, support: Sequence[AnyPath]) -> CheckResult:
    """|Fⁿ_t| ≤ M_n на выборке (M_n из F.bounds либо вычисленные конечные)"""
    n_max = localization_bound(F, support)
    observed = local_bounds(F, support, n_max)
    if F.bounds is None:
        ok = all(math.isfinite(float(m)) for m in observed)
        return CheckResult(ok, None if ok else observed, checked=len(observed))
    for n, (m, bound) in enumerate(zip(observed, F.bounds), start=1):
        if m > bound:
            return CheckResult(False, n, f"|F^{n}| reaches {m} > M_{n} = {bound}", n)
    return CheckResult(True, checked=len(observed))


# ==================== QSTOP ====================

@dataclass(frozen=True)
class QStopFamily:
    """
    QTime = точки сетки; Π_q = атомы σ(T_q) на носителе, заданные своими
    усечениями; QStop = правила q·1_A + r·1_{Aᶜ}.
    """
    grid: TimeGrid
    atoms: Dict[Any, Tuple[Any, ...]]

    @classmethod
    def from_support(cls, support: Sequence[AnyPath]) -> "QStopFamily":
        support = list(support)
        grid = support[0].grid
        atoms = {}
        for q in grid.points:
            keys = {}
            for omega in support:
                keys.setdefault(truncate(omega, q), None)
            atoms[q] = tuple(keys)
        return cls(grid, atoms)

    @property
    def qtimes(self) -> Tuple[Any, ...]:
        return self.grid.points

    def pisystem(self, q: Any) -> Tuple[Any, ...]:
        return self.atoms[q]

    def qstops(self) -> List[StoppingTime]:
        rules = [StoppingTime.constant(q) for q in self.qtimes]
        for q in self.qtimes:
            for r in self.qtimes:
                if r <= q:
                    continue
                for index, key in enumerate(self.atoms[q]):
                    rules.append(StoppingTime(
                        lambda omega, q=q, r=r, key=key: q if truncate(omega, q) == key else r,
                        name=f"q{q}A{index}r{r}",
                    ))
        return rules

    def check_rules(self, sample: Sequence[AnyPath]) -> CheckResult:
        for rule in self.qstops():
            result = is_stopping_time(rule, self.grid, sample)
            if not result:
                return CheckResult(False, (rule.name, result.witness), result.detail, result.checked)
        return CheckResult(True)


def _close(a: Any, b: Any) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= FLOAT_TOLERANCE
    return a == b


def _stopped_values(F: TestFunctional, mu: FiniteMeasure, n: int) -> List[Tuple[AnyPath, Any, Tuple[Any, ...]]]:
    stopped = stop_functional(F, n)
    return [(omega, m, stopped(omega).values) for omega, m in mu.atoms]


# ==================== ПРОВЕРКИ МАРТИНГАЛЬНОСТИ ====================

def is_canonical_local_mart(F: TestFunctional, mu: FiniteMeasure, Q: Optional[QStopFamily] = None) -> CheckResult:
    """E[Fⁿ_r 1_A] = E[Fⁿ_q 1_A] для всех n, q < r и A ∈ Π_q"""
    support = mu.support
    Q = Q or QStopFamily.from_support(support)
    grid = Q.grid
    checked = 0
    for n in range(1, localization_bound(F, support) + 1):
        rows = _stopped_values(F, mu, n)
        for q in Q.qtimes:
            i = grid.index(q)
            cells: Dict[Any, List[Tuple[Any, Tuple[Any, ...]]]] = defaultdict(list)
            for omega, m, values in rows:
                cells[truncate(omega, q)].append((m, values))
            for r in Q.qtimes:
                if r <= q:
                    continue
                j = grid.index(r)
                for key, members in cells.items():
                    checked += 1
                    left = sum((m * values[j] for m, values in members), 0)
                    right = sum((m * values[i] for m, values in members), 0)
                    if not _close(left, right):
                        return CheckResult(False, (n, q, r, key), f"E[F^{n}_r 1_A] = {left} != {right}", checked)
    return CheckResult(True, checked=checked)


def stepwise_martingale_test(F: TestFunctional, mu: FiniteMeasure) -> CheckResult:
    """Одношаговый тест: E[(Fⁿ_{k+1} − Fⁿ_k) 1_A] = 0 для атомов σ(T_{t_k})"""
    support = mu.support
    grid = support[0].grid
    checked = 0
    for n in range(1, localization_bound(F, support) + 1):
        rows = _stopped_values(F, mu, n)
        for k in range(grid.n_steps):
            cells: Dict[Any, Any] = defaultdict(int)
            for omega, m, values in rows:
                cells[truncate(omega, grid.time(k))] += m * (values[k + 1] - values[k])
            for key, drift in cells.items():
                checked += 1
                if not _close(drift, 0):
                    return CheckResult(False, (n, grid.time(k), key), f"one-step drift {drift}", checked)
    return CheckResult(True, checked=checked)


def mart_char_at(Y: TestFunctional, kappa: StoppingTime, mu: FiniteMeasure, Q: Optional[QStopFamily] = None) -> CheckResult:
    """
    E[Yⁿ_{τ∧κ} − Yⁿ_κ] = 0 и E[Yⁿ_{τ∨κ} − Yⁿ_κ] = 0 для всех n и τ ∈ QStop.
    """
    support = mu.support
    Q = Q or QStopFamily.from_support(support)
    rules = Q.qstops()
    checked = 0
    for n in range(1, localization_bound(Y, support) + 1):
        stopped = stop_functional(Y, n)
        rows = [(omega, m, stopped(omega)) for omega, m in mu.atoms]
        for tau in rules:
            below = above = 0
            for omega, m, path in rows:
                k, t = kappa(omega), tau(omega)
                at_kappa = path.value_at(k)
                below += m * (path.value_at(time_min(t, k)) - at_kappa)
                above += m * (path.value_at(time_max(t, k)) - at_kappa)
            checked += 1
            if not _close(below, 0) or not _close(above, 0):
                return CheckResult(False, (n, tau.name), f"stopped means {below}, {above}", checked)
    return CheckResult(True, checked=checked)


# ==================== ПОРОЖДЁННЫЕ СООТВЕТСТВИЯ ====================

def one_step_increment(F: TestFunctional, model: TreeModel, node: Any, move: Any) -> Any:
    """F на хвосте (node, child, child, ...) в момент 1"""
    path = model.to_path((node, model.child(node, move)))
    return F(path).values[1]


def mart_kernels(
    D: Sequence[TestFunctional],
    candidates: Sequence[TreeKernel],
) -> Callable[[TreeModel, Any], List[TreeKernel]]:
    """Ядра-кандидаты узла с E[ΔF | узел] = 0 для всех F ∈ D"""

    def admissible(model: TreeModel, node: Any) -> List[TreeKernel]:
        kept = []
        for kernel in candidates:
            if all(
                sum((p * one_step_increment(F, model, node, move) for move, p in kernel if p != 0), 0) == 0
                for F in D
            ):
                kept.append(kernel)
        return kept

    return admissible


@dataclass
class MartingaleSpace:
    """Дерево с ходами moves, из которых строятся кандидаты-законы"""
    depth: int
    moves: Tuple[Any, ...]
    start: Any = 0
    child: Callable[[Any, Any], Any] = walk_child
    root: Optional[Any] = None
    candidates: Optional[Tuple[TreeKernel, ...]] = None

    def __post_init__(self):
        if self.root is None:
            self.root = root_node(self.start)

    def kernels(self, denominator: int) -> List[TreeKernel]:
        """Явно заданные кандидаты либо все решётчатые ядра на ходах"""
        if self.candidates is not None:
            return list(self.candidates)
        return lattice_kernels(self.moves, denominator)


def generate_correspondence(
    D: Sequence[TestFunctional],
    X: StateMap,
    space: MartingaleSpace,
    denominator: int = 8,
    verify: bool = True,
    max_laws: Optional[int] = None,
) -> Tuple[ControlCorrespondence, TreeModel]:
    """
    P̄(x) = законы из узла x, при которых каждое F ∈ D - канонический
    локальный мартингал. Кандидаты - произведения решётчатых ядер.
    Каждый закон корня дополнительно проверяется is_canonical_local_mart.
    """
    admissible = mart_kernels(D, space.kernels(denominator))
    model = TreeModel(space.depth, lambda node: admissible(model, node), child=space.child, max_laws=max_laws)

    def assign_bar(node: Any):
        laws = model.laws(node)
        if not laws:
            raise InvariantViolationError(f"No candidate law makes every functional a martingale from {node!r}")
        return laws

    root_laws = assign_bar(space.root)
    if verify:
        for mu in root_laws:
            for F in D:
                result = is_canonical_local_mart(F, mu)
                if not result:
                    raise InvariantViolationError(
                        f"Generated law fails the martingale test for {F.name}: {result.detail}"
                    )
    logger.info(f"Generated {len(root_laws)} martingale laws from the root (denominator {denominator})")
    P = ControlCorrespondence.factored(X, assign_bar, name="P[" + ",".join(F.name for F in D) + "]")
    return P, model


def all_candidate_laws(space: MartingaleSpace, denominator: int, max_laws: Optional[int] = None) -> Tuple[FiniteMeasure, ...]:
    """Все законы из корня без мартингальных ограничений (D = ∅)"""
    candidates = space.kernels(denominator)
    model = TreeModel(space.depth, lambda node: candidates, child=space.child, max_laws=max_laws)
    return model.laws(space.root)


def space_sample(model: TreeModel, root: Any) -> List[Path]:
    """Корень, носители законов корня, их усечения и хвосты из промежуточных узлов"""
    root_laws = model.laws(root)
    paths = [model.node_path(root)] + support_paths(root_laws)
    tails = []
    for path in paths:
        node = path.terminal
        if node.clock < model.depth:
            for mu in model.laws(node)[:1]:
                tails.extend(mu.support)
    return list(dict.fromkeys(paths + tails))


def verify_dpp_mart(
    D: Sequence[TestFunctional],
    X: StateMap,
    G: Callable[[AnyPath], Any],
    stopping_times: Sequence[StoppingTime],
    space: MartingaleSpace,
    denominator: int = 8,
    max_laws: Optional[int] = None,
) -> MartDPPReport:
    """
    DPP для (D, X)-порождённого соответствия: гипотезы (TC-морфизмы,
    локальная ограниченность, ∗ - фактор X, хвостовое G) проверяются и
    сообщаются по отдельности; DPP вычисляется в любом случае.
    """
    P, model = generate_correspondence(D, X, space, denominator, verify=False, max_laws=max_laws)
    sample = space_sample(model, space.root)
    root_laws = model.laws(space.root)
    hypotheses: Dict[str, bool] = {}
    for F in D:
        hypotheses[f"martingale_laws:{F.name}"] = all(is_canonical_local_mart(F, mu) for mu in root_laws)
        hypotheses[f"tc_morphism:{F.name}"] = bool(is_tc_morphism(F, STRICT, sample))
        hypotheses[f"locally_bounded:{F.name}"] = bool(is_locally_bounded(F, sample))
    hypotheses["factor_of_state"] = bool(factors_through_state(STRICT, X, sample).is_factor)
    # хвост должен помещаться в оставшийся горизонт, иначе склейка его обрезает
    horizon = space.depth
    triples = [
        (omega, t, tail)
        for omega in sample
        for t in omega.grid.points
        for tail in sample
        if STRICT.compat(omega, t, tail) and truncate(tail, horizon - t) == tail
    ]
    hypotheses["tail_map"] = bool(is_tail_map(G, STRICT, triples))
    for name, ok in hypotheses.items():
        if not ok:
            logger.warning(f"Hypothesis {name} fails; DPP is still computed for diagnostics")

    root_path = model.node_path(space.root)
    cache: Dict[AnyPath, Any] = {}
    reports = []
    for tau in stopping_times:
        report = verify_dpp(P, G, tau, root_path, cache=cache)
        report.instance_id = f"mart-depth{space.depth}-q{denominator}"
        reports.append(report)
    return MartDPPReport(
        hypotheses=hypotheses,
        n_laws={"root": len(P(root_path))},
        reports=reports,
    )
