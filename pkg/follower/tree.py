"""
Монотонное преследование на конечном дереве

Узел хранит (W, Z, α) и всю историю. Ход (dw, d, e): W += dw, α += d,
Z += c(W)·d + e. P̄_c - законы, при которых W мартингал (генерируется
тестовым функционалом приращения W); P̄_l - законы полной модели (d и e
произвольны), на носителе которых Z = ∫ c(W) dα. Пересечение P̄_c ∩ P̄_l -
соответствие задачи преследования.
"""
import logging
from fractions import Fraction
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

from core.concat import STRICT
from core.measures import FiniteMeasure
from core.pathspace import CheckResult, Path, PathKind, StateMap, StoppingTime, TimeGrid
from core.schemas import SplitReport
from dpp.control import (
    ControlCorrespondence,
    check_concatenable,
    check_disintegrable,
    combine,
    verify_dpp,
)
from dpp.martingale import MartingaleSpace, generate_correspondence, increment_functional, space_sample
from dpp.trees import TreeKernel, TreeModel

from .follower import left_integral_characterization

logger = logging.getLogger(__name__)

PUSHES = (0, 1)
EXTRA = (0, 1)


class FollowerNode(NamedTuple):
    clock: int
    w: int
    z: Fraction
    alpha: int
    history: Tuple[Tuple[int, Fraction, int], ...]


def default_coupling(w: int) -> Fraction:
    return Fraction(1, 2) + abs(w)


def follower_root() -> FollowerNode:
    return FollowerNode(0, 0, Fraction(0), 0, ((0, Fraction(0), 0),))


def follower_child(coupling: Callable[[int], Any]) -> Callable[[FollowerNode, Tuple[int, int, int]], FollowerNode]:
    def child(node: FollowerNode, move: Tuple[int, int, int]) -> FollowerNode:
        dw, d, e = move
        w = node.w + dw
        z = node.z + coupling(node.w) * d + e
        alpha = node.alpha + d
        return FollowerNode(node.clock + 1, w, z, alpha, node.history + ((w, z, alpha),))
    return child


def follower_kernels(denominator: int = 2, extra: Sequence[int] = EXTRA) -> Tuple[TreeKernel, ...]:
    """Ядра ((−1, d, e), 1 − p), ((+1, d, e), p): решение (d, e) принимается до шума"""
    kernels = []
    for count in range(denominator + 1):
        p = Fraction(count, denominator)
        for d in PUSHES:
            for e in extra:
                kernels.append((((-1, d, e), 1 - p), ((1, d, e), p)))
    return tuple(kernels)


def follower_state() -> StateMap:
    return StateMap(lambda omega: omega.terminal, name="follower-node")


def follower_G(omega: Path) -> Fraction:
    """G = Z_T + (W_T − α_T)²"""
    node = omega.terminal
    return node.z + (node.w - node.alpha) ** 2


def follower_stopping_times(depth: int, radius: int = 1) -> List[StoppingTime]:
    times = [StoppingTime.constant(Fraction(k)) for k in range(depth + 1)]
    times.append(StoppingTime.first_entry(
        lambda d: abs(d) >= radius, name=f"exit:{radius}", coordinate=lambda node: node.w - node.alpha,
    ))
    times.append(StoppingTime.never())
    return times


def node_paths(omega: Path) -> Tuple[Path, Path, Path]:
    """(ζ, γ, α) хвоста из начального узла: ζ = Z − Z_0, γ = c(W), α − α_0"""
    return tuple(
        Path(omega.grid, kind, tuple(values))
        for kind, values in zip(
            (PathKind.CAGLAD_STEP, PathKind.CADLAG_STEP, PathKind.CAGLAD_STEP),
            zip(*[(n.z - omega.head.z, n.w, n.alpha - omega.head.alpha) for n in omega.values]),
        )
    )


def check_left_integral_support(
    mu: FiniteMeasure,
    coupling: Callable[[int], Any] = default_coupling,
) -> CheckResult:
    """Каждый путь носителя удовлетворяет характеризации левого интеграла"""
    checked = 0
    for omega in mu.support:
        zeta, w, alpha = node_paths(omega)
        gamma = w.with_values([coupling(v) for v in w.values])
        result = left_integral_characterization(zeta, gamma, alpha)
        checked += result.checked
        if not result:
            return CheckResult(False, (omega, result.witness), result.detail, checked)
    return CheckResult(True, checked=checked)


# ==================== СООТВЕТСТВИЯ ====================

class FollowerTree:
    """P̄_c, P̄_l и их пересечение на дереве глубины depth"""

    def __init__(
        self,
        depth: int = 2,
        coupling: Callable[[int], Any] = default_coupling,
        denominator: int = 2,
        max_laws: Optional[int] = None,
    ):
        self.depth = depth
        self.coupling = coupling
        self.denominator = denominator
        self.child = follower_child(coupling)
        self.root = follower_root()
        self.X = follower_state()

        candidates = follower_kernels(denominator)
        space = MartingaleSpace(depth, moves=(), child=self.child, root=self.root, candidates=candidates)
        W = increment_functional(lambda node: node.w, name="W")
        self.P_c, self.model_c = generate_correspondence([W], self.X, space, denominator, max_laws=max_laws)

        self.candidates = candidates
        self.model_full = TreeModel(depth, lambda node: candidates, child=self.child, max_laws=max_laws)
        # полное перечисление растёт слишком быстро: ядра отсекаются по одному шагу
        self.model_l = TreeModel(depth, self.left_integral_kernels, child=self.child, max_laws=max_laws)
        self._left_laws: Dict[FollowerNode, Tuple[FiniteMeasure, ...]] = {}
        self.P_l = ControlCorrespondence.factored(self.X, self.left_integral_laws, name="P_l")

        self.P = combine([self.P_c, self.P_l], mode="intersection")
        # пересечение напрямую: p = 1/2 и e = 0
        bookkeeping = follower_kernels(denominator, extra=(0,))
        both = tuple(k for k in bookkeeping if k[0][1] == Fraction(1, 2))
        self.model = TreeModel(depth, lambda node: both, child=self.child, max_laws=max_laws)

    def left_integral_kernels(self, node: FollowerNode) -> Tuple[TreeKernel, ...]:
        """Ядра из node, каждый шаг которых согласован с левым интегралом"""
        grid = TimeGrid.unit(1)
        kept = []
        for kernel in self.candidates:
            step = FiniteMeasure(tuple(
                (Path(grid, PathKind.CADLAG_STEP, (node, self.child(node, move))), p)
                for move, p in kernel if p != 0
            ))
            if check_left_integral_support(step, self.coupling):
                kept.append(kernel)
        return tuple(kept)

    def left_integral_laws(self, node: FollowerNode) -> Tuple[FiniteMeasure, ...]:
        """Законы P̄_l из node: пошаговый отбор ядер и проверка всего носителя"""
        cached = self._left_laws.get(node)
        if cached is None:
            laws = self.model_l.laws(node)
            cached = tuple(mu for mu in laws if check_left_integral_support(mu, self.coupling))
            logger.debug(f"P_l at {node!r}: kept {len(cached)} of {len(laws)} laws")
            self._left_laws[node] = cached
        return cached

    @property
    def root_path(self) -> Path:
        return self.model.node_path(self.root)

    def oracle(self) -> Fraction:
        """min E[G] обратной индукцией по пересечению"""
        return self.model.oracle(lambda node: node.z + (node.w - node.alpha) ** 2, self.root, orientation="inf")

    def stopping_times(self) -> List[StoppingTime]:
        return follower_stopping_times(self.depth)


def check_correspondence_split(
    depth: int = 2,
    coupling: Callable[[int], Any] = default_coupling,
    denominator: int = 2,
    max_measures: Optional[int] = None,
    seed: int = 0,
    max_laws: Optional[int] = None,
) -> SplitReport:
    """
    P̄_c и P̄_l склеиваемы, пересечение распадается (с исправлением
    ядра на нулевых ячейках), DPP для пересечения выполняется в форме inf.
    """
    tree = FollowerTree(depth, coupling, denominator, max_laws)
    taus = tree.stopping_times()
    root = tree.root_path

    sample_c = space_sample(tree.model_c, tree.root)
    sample_l = space_sample(tree.model_l, tree.root)
    sample = space_sample(tree.model, tree.root)
    concat_c = check_concatenable(tree.P_c, STRICT, taus, sample_c, max_measures=max_measures, seed=seed)
    concat_l = check_concatenable(tree.P_l, STRICT, taus, sample_l, max_measures=max_measures, seed=seed)
    disint = check_disintegrable(tree.P, STRICT, taus, sample, repair=True, max_measures=max_measures, seed=seed)
    unrepaired = check_disintegrable(tree.P, STRICT, taus, sample, repair=False, max_measures=max_measures, seed=seed)

    cache: Dict[Path, Any] = {}
    reports = [verify_dpp(tree.P, follower_G, tau, root, orientation="inf", cache=cache) for tau in taus]
    dpp_equal = all(r.geq and r.leq for r in reports)
    lhs = reports[0].lhs
    rhs = next((r.rhs for r in reports if r.tau_id == "never"), reports[-1].rhs)
    oracle = tree.oracle()
    if lhs != oracle:
        logger.warning(f"Follower tree value {lhs} differs from backward induction {oracle}")
        dpp_equal = False

    details = []
    for name, result in (("P_c concatenable", concat_c), ("P_l concatenable", concat_l), ("P disintegrable", disint)):
        if not result:
            details.append(f"{name}: {result.detail}")
    failed = [r.tau_id for r in reports if not (r.geq and r.leq)]
    if failed:
        details.append(f"DPP fails at {', '.join(failed)}")
    if not unrepaired:
        details.append(f"without repair on null cells: {unrepaired.detail}")

    n_laws = {
        "P_c": len(tree.P_c(root)),
        "P_l": len(tree.P_l(root)),
        "P": len(tree.P(root)),
    }
    logger.info(f"Follower tree depth {depth}: laws {n_laws}, value {lhs}, DPP {'holds' if dpp_equal else 'fails'}")
    return SplitReport(
        p_c_concatenable=bool(concat_c),
        p_l_concatenable=bool(concat_l),
        intersection_disintegrable=bool(disint),
        unrepaired_disintegrable=bool(unrepaired),
        dpp_equal=dpp_equal,
        lhs=lhs,
        rhs=rhs,
        n_laws=n_laws,
        detail="; ".join(details),
        orientation="inf",
    )
