"""
Конечные деревья: узлы-состояния, перечисление законов, генератор экземпляров

Узел (clock, position, history) определяет всё прошлое пути, поэтому
отображение состояния X = текущий узел. Путь на сетке {0..depth}
замораживается, когда clock достигает depth (время - координата
состояния), и G = g(конечная позиция) - точное хвостовое отображение
для строгой конкатенации.
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

from core.exceptions import EnumerationLimitError, PreconditionError
from core.measures import FiniteMeasure
from core.pathspace import Path, PathKind, StateMap, StoppingTime, TimeGrid, truncate
from core.rng import tagged_generator
from core.settings import get_settings

from .control import ControlCorrespondence

logger = logging.getLogger(__name__)

# ядро перехода: ((ход, вероятность), ...)
TreeKernel = Tuple[Tuple[Any, Fraction], ...]
# внутреннее представление закона: отсортированные пары (последовательность узлов, масса)
SeqLaw = Tuple[Tuple[Tuple[Any, ...], Fraction], ...]

INSTANCE_KINDS = ("closed", "concat_only", "disint_only")


class Node(NamedTuple):
    clock: int
    position: Any
    history: Tuple[Any, ...]


def walk_child(node: Node, move: Any) -> Node:
    position = node.position + move
    return Node(node.clock + 1, position, node.history + (position,))


def root_node(start: Any = 0) -> Node:
    return Node(0, start, (start,))


def lattice_kernels(moves: Sequence[Any], denominator: int) -> List[TreeKernel]:
    """Все распределения на ходах с массами из {0, 1/Q, ..., 1}"""
    kernels = []
    for counts in itertools.product(range(denominator + 1), repeat=len(moves) - 1):
        rest = denominator - sum(counts)
        if rest < 0:
            continue
        probs = tuple(Fraction(c, denominator) for c in counts + (rest,))
        kernels.append(tuple(zip(moves, probs)))
    return kernels


# ==================== МОДЕЛЬ ====================

@dataclass
class TreeModel:
    """
    Дерево глубины depth с допустимыми ядрами в каждом узле.

    laws(node) перечисляет все законы путей из узла, получаемые выбором
    допустимого ядра в каждом достижимом узле (замыкание относительно
    склейки). Дети с нулевой вероятностью не раскрываются.
    """
    depth: int
    kernels: Callable[[Any], Sequence[TreeKernel]]
    child: Callable[[Any, Any], Any] = walk_child
    max_laws: Optional[int] = None
    _seq_laws: Dict[Any, Tuple[SeqLaw, ...]] = field(default_factory=dict, repr=False)
    _laws: Dict[Any, Tuple[FiniteMeasure, ...]] = field(default_factory=dict, repr=False)
    _paths: Dict[Tuple[Any, ...], Path] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.max_laws is None:
            self.max_laws = get_settings().max_laws

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.unit(self.depth)

    def to_path(self, seq: Tuple[Any, ...]) -> Path:
        """Последовательность узлов, дополненная последним узлом до depth + 1 значений"""
        path = self._paths.get(seq)
        if path is None:
            values = seq + (seq[-1],) * (self.depth + 1 - len(seq))
            path = Path(self.grid, PathKind.CADLAG_STEP, values)
            self._paths[seq] = path
        return path

    def node_path(self, node: Any) -> Path:
        """Путь, постоянный в узле (начало хвоста из node)"""
        return self.to_path((node,))

    def _enumerate(self, node: Any) -> Tuple[SeqLaw, ...]:
        cached = self._seq_laws.get(node)
        if cached is not None:
            return cached
        if node.clock >= self.depth:
            result = ((((node,), Fraction(1)),),)
        else:
            found = set()
            for kernel in self.kernels(node):
                branches = [(p, self.child(node, move)) for move, p in kernel if p != 0]
                child_sets = [self._enumerate(child) for _, child in branches]
                for choice in itertools.product(*child_sets):
                    atoms: Dict[Tuple[Any, ...], Fraction] = {}
                    for (p, _), law in zip(branches, choice):
                        for seq, m in law:
                            key = (node,) + seq
                            atoms[key] = atoms.get(key, 0) + p * m
                    found.add(tuple(sorted(atoms.items())))
                    if len(found) > self.max_laws:
                        raise EnumerationLimitError(
                            f"More than {self.max_laws} laws from node {node!r}. "
                            f"Reduce depth or kernels, or raise TCDPP_MAX_LAWS."
                        )
            result = tuple(sorted(found))
        self._seq_laws[node] = result
        return result

    def laws(self, node: Any) -> Tuple[FiniteMeasure, ...]:
        cached = self._laws.get(node)
        if cached is None:
            cached = tuple(
                FiniteMeasure(tuple((self.to_path(seq), m) for seq, m in law))
                for law in self._enumerate(node)
            )
            self._laws[node] = cached
            logger.debug(f"{len(cached)} laws from node {node!r}")
        return cached

    def count_laws(self, node: Any) -> int:
        return len(self._enumerate(node))

    def oracle(self, g: Callable[[Any], Any], node: Any, orientation: str = "sup",
               memo: Optional[Dict[Any, Any]] = None) -> Any:
        """Обратная индукция: max (min) по ядрам от Σ p·v(child), v = g на глубине"""
        memo = {} if memo is None else memo
        if node in memo:
            return memo[node]
        if node.clock >= self.depth:
            result = g(node)
        else:
            candidates = [
                sum((p * self.oracle(g, self.child(node, move), orientation, memo)
                     for move, p in kernel if p != 0), 0)
                for kernel in self.kernels(node)
            ]
            result = max(candidates) if orientation == "sup" else min(candidates)
        memo[node] = result
        return result


def node_state() -> StateMap:
    return StateMap(lambda omega: omega.terminal, name="node")


def tree_correspondence(
    models: Callable[[Any], TreeModel],
    name: str = "P",
) -> ControlCorrespondence:
    """P(ω) = P̄(X(ω)): законы из текущего узла по модели, выбранной для узла"""
    X = node_state()
    return ControlCorrespondence.factored(X, lambda node: models(node).laws(node), name=name)


def tree_stopping_times(depth: int, positions: Sequence[Any], coordinate: Callable[[Any], Any] = None) -> List[StoppingTime]:
    """Константы 0..depth, первые попадания в каждую позицию и INFINITY"""
    coordinate = coordinate or (lambda node: node.position)
    times = [StoppingTime.constant(Fraction(k)) for k in range(depth + 1)]
    for level in positions:
        times.append(StoppingTime.first_entry(
            lambda x, level=level: x == level, name=f"hit={level}", coordinate=coordinate,
        ))
    times.append(StoppingTime.never())
    return times


def support_paths(laws: Sequence[FiniteMeasure]) -> List[Path]:
    """Пути носителей и все их усечения, в детерминированном порядке"""
    seen = {}
    for mu in laws:
        for omega in mu.support:
            for t in omega.grid.points:
                seen.setdefault(truncate(omega, t), None)
    return list(seen)


# ==================== ЭКЗЕМПЛЯРЫ ====================

@dataclass
class TreeInstance:
    """
    Экземпляр абстрактной задачи на дереве.

    kind="closed": все ядра в каждом узле;
    "concat_only": в корне все законы, в остальных узлах один закон (ядро 0);
    "disint_only": в корне один закон (ядро 0 везде), в остальных все.
    """
    instance_id: str
    kind: str
    depth: int
    moves: Tuple[Any, ...]
    all_kernels: Tuple[TreeKernel, ...]
    payoff: Dict[Any, int]
    max_laws: Optional[int] = None
    full: TreeModel = field(init=False)
    restricted: TreeModel = field(init=False)

    def __post_init__(self):
        if self.kind not in INSTANCE_KINDS:
            raise PreconditionError(f"Unknown instance kind {self.kind!r}; expected one of {INSTANCE_KINDS}")
        self.full = TreeModel(self.depth, lambda node: self.all_kernels, max_laws=self.max_laws)
        self.restricted = TreeModel(self.depth, lambda node: self.all_kernels[:1], max_laws=self.max_laws)

    @property
    def root(self) -> Node:
        return root_node(0)

    @property
    def root_path(self) -> Path:
        return self.full.node_path(self.root)

    def model_for(self, node: Node) -> TreeModel:
        is_root = node.clock == 0
        if self.kind == "closed":
            return self.full
        if self.kind == "concat_only":
            return self.full if is_root else self.restricted
        return self.restricted if is_root else self.full

    def correspondence(self) -> ControlCorrespondence:
        return tree_correspondence(self.model_for, name=f"P[{self.instance_id}]")

    def g(self, node: Node) -> int:
        return self.payoff[node.position]

    def G(self, omega: Path) -> int:
        return self.payoff[omega.terminal.position]

    def stopping_times(self) -> List[StoppingTime]:
        return tree_stopping_times(self.depth, sorted(self.payoff))

    def oracle(self, orientation: str = "sup") -> Any:
        """Обратная индукция для функции цены в корне (для closed совпадает с v)"""
        return self.full.oracle(self.g, self.root, orientation)

    def sample(self) -> List[Path]:
        """Корень, пути носителей законов корня и их усечения"""
        return [self.root_path] + support_paths(self.full.laws(self.root))


def estimate_law_count(depth: int, branching: int, n_kernels: int) -> int:
    count = 1
    for _ in range(depth):
        count = n_kernels * count ** branching
    return count


def generate_instance(
    seed: int,
    index: int,
    depth: int = 3,
    branching: int = 2,
    n_kernels: int = 3,
    kind: str = "closed",
    denominator: int = 8,
    max_laws: Optional[int] = None,
) -> TreeInstance:
    """
    Случайный экземпляр: ходы {−1, +1} или {−1, 0, +1}, решётчатые ядра,
    целочисленный выигрыш на конечных позициях. Число ядер уменьшается,
    пока оценка числа законов превышает max_laws.
    """
    limit = max_laws if max_laws is not None else get_settings().max_laws
    gen = tagged_generator(seed, "tree", index, kind)
    moves = (-1, 1) if branching == 2 else (-1, 0, 1)
    k = n_kernels
    while k > 1 and estimate_law_count(depth, branching, k) > limit:
        k -= 1
    if k != n_kernels:
        logger.warning(f"Instance {index}: reduced kernels from {n_kernels} to {k} to stay under {limit} laws")

    kernels = []
    while len(kernels) < k:
        cuts = sorted(int(c) for c in gen.integers(0, denominator + 1, size=len(moves) - 1))
        bounds = [0] + cuts + [denominator]
        probs = tuple(Fraction(b - a, denominator) for a, b in zip(bounds, bounds[1:]))
        kernel = tuple(zip(moves, probs))
        if kernel not in kernels:
            kernels.append(kernel)
    payoff = {x: int(gen.integers(0, 10)) for x in range(-depth, depth + 1)}
    return TreeInstance(
        instance_id=f"{kind}-{seed}-{index}",
        kind=kind,
        depth=depth,
        moves=moves,
        all_kernels=tuple(kernels),
        payoff=payoff,
        max_laws=max_laws,
    )
