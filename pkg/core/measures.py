"""
Вероятностные меры и ядра на пространствах путей

FiniteMeasure - конечный носитель с точными (Fraction) или float массами,
EmpiricalMeasure - выборка Монте-Карло в виде массивов numpy.
Ядра, push-forward, усечения, конкатенация μ ∗_τ ν и условные ядра.
"""
import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from pathlib import Path as FilePath
from typing import Any, Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .concat import Concatenation, concat, shift
from .exceptions import CompatibilityError, InvariantViolationError, UnsupportedKindError
from .pathspace import (
    INFINITY,
    AnyPath,
    CheckResult,
    Path,
    PathKind,
    ProductPath,
    StateMap,
    StoppingTime,
    TimeGrid,
    _decode_scalar,
    _encode_scalar,
    path_from_csv,
    path_to_csv,
    truncate_at,
)

logger = logging.getLogger(__name__)

FLOAT_MASS_TOLERANCE = 1e-12


def _is_exact(x: Any) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


# ==================== КОНЕЧНЫЕ МЕРЫ ====================

@dataclass(frozen=True)
class FiniteMeasure:
    """
    Мера с конечным носителем: атомы (путь, масса).

    Атомы с одинаковым путём сливаются, нулевые массы отбрасываются,
    порядок атомов канонический, поэтому равенство мер - это равенство
    списков атомов. Точные и float массы в одной мере не смешиваются.
    """
    atoms: Tuple[Tuple[Any, Any], ...]
    normalized: bool = True

    def __post_init__(self):
        merged: Dict[Any, Any] = {}
        has_exact = has_float = False
        for omega, mass in self.atoms:
            if mass < 0:
                raise InvariantViolationError(f"Negative mass {mass} on atom {omega!r}")
            if _is_exact(mass):
                has_exact = True
            else:
                has_float = True
            merged[omega] = merged.get(omega, 0) + mass
        if has_exact and has_float:
            raise InvariantViolationError(
                "Exact and floating masses are mixed in one measure. "
                "Choose one arithmetic mode per computation."
            )
        atoms = tuple(sorted(
            ((omega, mass) for omega, mass in merged.items() if mass != 0),
            key=lambda atom: repr(atom[0]),
        ))
        object.__setattr__(self, "atoms", atoms)
        if self.normalized:
            total = sum((m for _, m in atoms), 0)
            if has_float:
                ok = abs(total - 1) <= FLOAT_MASS_TOLERANCE
            else:
                ok = total == 1
            if not ok:
                raise InvariantViolationError(f"Measure is not normalized: total mass {total}")

    @classmethod
    def point(cls, omega: Any) -> "FiniteMeasure":
        return cls(((omega, Fraction(1)),))

    @classmethod
    def uniform(cls, paths: Sequence[Any]) -> "FiniteMeasure":
        paths = list(paths)
        return cls(tuple((omega, Fraction(1, len(paths))) for omega in paths))

    @property
    def support(self) -> Tuple[Any, ...]:
        return tuple(omega for omega, _ in self.atoms)

    @property
    def exact(self) -> bool:
        return all(_is_exact(m) for _, m in self.atoms)

    def total_mass(self) -> Any:
        return sum((m for _, m in self.atoms), 0)

    def mass_of(self, omega: Any) -> Any:
        for path, mass in self.atoms:
            if path == omega:
                return mass
        return 0

    def __iter__(self) -> Iterator[Tuple[Any, Any]]:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)


def mixture(weighted: Iterable[Tuple[Any, FiniteMeasure]]) -> FiniteMeasure:
    """Σ w_i μ_i для весов, дающих в сумме 1"""
    atoms = []
    for weight, mu in weighted:
        if weight == 0:
            continue
        atoms.extend((omega, weight * m) for omega, m in mu.atoms)
    return FiniteMeasure(tuple(atoms))


# ==================== ЭМПИРИЧЕСКИЕ МЕРЫ ====================

@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """
    Выборка путей Монте-Карло.

    arrays[name] имеет первую ось по путям (N, K+1, ...). kinds задаёт,
    какие массивы являются компонентами пути-произведения и какого они вида;
    остальные массивы (например, "absorbed") - служебные.
    """
    grid: TimeGrid
    seed: int
    arrays: Mapping[str, np.ndarray]
    kinds: Tuple[Tuple[str, PathKind], ...]
    labels: Tuple[Any, ...] = ()

    def __post_init__(self):
        if not self.arrays:
            raise InvariantViolationError("An empirical measure needs at least one sample")
        sizes = {len(a) for a in self.arrays.values()}
        if len(sizes) != 1 or 0 in sizes:
            raise InvariantViolationError(f"Sample arrays have inconsistent sizes {sorted(sizes)}")

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.arrays.values())))

    def __len__(self) -> int:
        return self.n_samples

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def _component(self, name: str, kind: PathKind, i: int) -> Path:
        data = self.arrays[name][i]
        if kind is PathKind.CONTROL_CLASS:
            return Path(self.grid, kind, tuple(self.labels[int(j)] for j in data), labels=self.labels)
        if data.ndim == 1:
            values = tuple(float(v) for v in data)
        elif data.shape[1] == 1:
            values = tuple(float(v[0]) for v in data)
        else:
            values = tuple(tuple(float(x) for x in v) for v in data)
        return Path(self.grid, kind, values, nondecreasing=(kind is PathKind.CAGLAD_STEP))

    def path(self, i: int) -> ProductPath:
        """i-й путь выборки как путь-произведение"""
        return ProductPath(tuple(self._component(name, kind, i) for name, kind in self.kinds))

    def paths(self, limit: Optional[int] = None) -> Iterator[ProductPath]:
        n = self.n_samples if limit is None else min(limit, self.n_samples)
        for i in range(n):
            yield self.path(i)


# ==================== ОЦЕНКИ ====================

@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, values: np.ndarray, block_size: int = 4096) -> "Estimate":
        moments = RunningMoments()
        for start in range(0, len(values), block_size):
            moments.add(values[start:start + block_size])
        return moments.estimate()


@dataclass
class RunningMoments:
    """Поблочное накопление среднего и дисперсии в фиксированном порядке блоков"""
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, block: np.ndarray) -> None:
        block = np.asarray(block, dtype=float)
        nb = len(block)
        if nb == 0:
            return
        block_mean = float(np.mean(block))
        block_m2 = float(np.sum((block - block_mean) ** 2))
        total = self.n + nb
        delta = block_mean - self.mean
        self.mean += delta * nb / total
        self.m2 += block_m2 + delta * delta * self.n * nb / total
        self.n = total

    def estimate(self) -> Estimate:
        if self.n == 0:
            raise InvariantViolationError("No samples were accumulated")
        if self.n == 1:
            return Estimate(self.mean, 0.0, 1)
        variance = self.m2 / (self.n - 1)
        return Estimate(self.mean, math.sqrt(max(variance, 0.0) / self.n), self.n)


# ==================== ЯДРА ====================

@dataclass(frozen=True)
class Kernel:
    """ν: путь ↦ мера на путях"""
    map: Callable[[AnyPath], FiniteMeasure]
    name: str = "nu"

    def __call__(self, omega: AnyPath) -> FiniteMeasure:
        return self.map(omega)

    @classmethod
    def constant(cls, mu: FiniteMeasure) -> "Kernel":
        return cls(lambda omega: mu, name="constant")


def pushforward(mu: FiniteMeasure, f: Callable[[Any], Any]) -> FiniteMeasure:
    return FiniteMeasure(tuple((f(omega), m) for omega, m in mu.atoms), normalized=mu.normalized)


def truncate_measure(mu: FiniteMeasure, tau: StoppingTime) -> FiniteMeasure:
    """μ_{≤τ} = μ ∘ T_τ⁻¹"""
    return pushforward(mu, lambda omega: truncate_at(omega, tau))


def restrict_kernel(nu: Kernel, tau: StoppingTime) -> Kernel:
    """ν^{≤τ}(ω, ·) = ν(T_τ(ω), ·)"""
    return Kernel(lambda omega: nu(truncate_at(omega, tau)), name=f"{nu.name}^<={tau.name}")


def truncate_kernel(nu: Kernel, tau: StoppingTime) -> Kernel:
    """ν_{≤τ}(ω, ·) = ν(ω, ·) ∘ T_τ⁻¹"""
    return Kernel(lambda omega: truncate_measure(nu(omega), tau), name=f"{nu.name}_<={tau.name}")


def compatible(mu: FiniteMeasure, nu: Kernel, tau: StoppingTime, c: Concatenation) -> CheckResult:
    """ν^{≤τ}_ω(C_{ω,τ(ω)}) = 1 для всех ω из носителя μ"""
    checked = 0
    for omega, _ in mu.atoms:
        t = tau(omega)
        if t is INFINITY:
            continue
        for omega2, _ in nu(truncate_at(omega, tau)).atoms:
            checked += 1
            if not c.compat(omega, t, omega2):
                return CheckResult(False, (omega, t, omega2), "kernel charges incompatible tails", checked)
    return CheckResult(True, checked=checked)


def concat_measure(mu: FiniteMeasure, tau: StoppingTime, nu: Kernel, c: Concatenation) -> FiniteMeasure:
    """
    μ ∗_τ ν: образ μ ⊗ ν^{≤τ} при (ω, ω′) ↦ ω ∗_{τ(ω)} ω′.

    Ядро вычисляется в усечённом пути T_τ(ω), поэтому результат зависит
    только от F_τ-измеримой части ν.
    """
    atoms = []
    for omega, m in mu.atoms:
        t = tau(omega)
        if t is INFINITY:
            atoms.append((omega, m))
            continue
        for omega2, m2 in nu(truncate_at(omega, tau)).atoms:
            if not c.compat(omega, t, omega2):
                raise CompatibilityError(
                    f"Kernel {nu.name} charges a tail incompatible with the path at t={t}. "
                    f"concat_measure needs compatible(mu, nu, tau, c).",
                    pair=(omega, t, omega2),
                )
            atoms.append((concat(omega, t, omega2, c), m * m2))
    return FiniteMeasure(tuple(atoms), normalized=mu.normalized)


def integrate(G: Callable[[Any], Any], mu: Union[FiniteMeasure, EmpiricalMeasure], block_size: int = 4096):
    """
    ∫ G dμ.

    Для FiniteMeasure - точная сумма Σ m·G(ω), расширенная вещественная:
    +∞ на положительной массе даёт +∞ (с предупреждением).
    Для EmpiricalMeasure G векторизована: G(mu) -> массив длины N,
    результат - Estimate со стандартной ошибкой.
    """
    if isinstance(mu, EmpiricalMeasure):
        values = np.asarray(G(mu), dtype=float)
        if values.shape != (mu.n_samples,):
            raise UnsupportedKindError(
                f"Vectorized functional returned shape {values.shape}, expected ({mu.n_samples},)"
            )
        return Estimate.from_samples(values, block_size)

    total = 0
    plus_inf = minus_inf = False
    for omega, m in mu.atoms:
        value = G(omega)
        if isinstance(value, float) and math.isinf(value):
            if value > 0:
                plus_inf = True
            else:
                minus_inf = True
            continue
        total += m * value
    if plus_inf:
        logger.warning("Integral is +inf: G is +inf on a set of positive mass")
        return math.inf
    if minus_inf:
        return -math.inf
    return total


# ==================== УСЛОВНЫЕ ЯДРА ====================

def _fallback_tail(key: AnyPath, tau: StoppingTime, c: Concatenation) -> FiniteMeasure:
    # путь-условие, продолженный константой после τ
    t = tau(key)
    if t is INFINITY:
        return FiniteMeasure.point(key)
    return FiniteMeasure.point(shift(t, key, c))


def _normalize_cells(cells: Dict[Any, List[Tuple[Any, Any]]]) -> Dict[Any, FiniteMeasure]:
    laws = {}
    for key, tails in cells.items():
        total = sum((m for _, m in tails), 0)
        laws[key] = FiniteMeasure(tuple((tail, m / total) for tail, m in tails))
    return laws


def conditional_kernel(
    mu: FiniteMeasure,
    tau: StoppingTime,
    c: Concatenation,
    fallback: Optional[Callable[[AnyPath], FiniteMeasure]] = None,
) -> Kernel:
    """
    Условный закон θ_τ при данном ω_{≤τ}: группировка атомов μ по усечениям.

    На ячейках нулевой меры ядро возвращает fallback(ω_{≤τ}); по умолчанию
    точечную массу в пути-условии, продолженном константой.
    """
    cells: Dict[Any, List[Tuple[Any, Any]]] = defaultdict(list)
    for omega, m in mu.atoms:
        t = tau(omega)
        if t is INFINITY:
            continue
        cells[truncate_at(omega, tau)].append((shift(t, omega, c), m))
    laws = _normalize_cells(cells)

    def kernel(omega: AnyPath) -> FiniteMeasure:
        key = truncate_at(omega, tau)
        law = laws.get(key)
        if law is not None:
            return law
        return fallback(key) if fallback is not None else _fallback_tail(key, tau, c)

    return Kernel(kernel, name=f"cond[{tau.name}]")


def state_conditional_kernel(
    mu: FiniteMeasure,
    kappa: StoppingTime,
    X: StateMap,
    c: Concatenation,
    fallback: Optional[Callable[[AnyPath], FiniteMeasure]] = None,
) -> Kernel:
    """μ(θ_κ ∈ · | X_κ = x): группировка атомов по значению состояния в момент κ"""
    cells: Dict[Any, List[Tuple[Any, Any]]] = defaultdict(list)
    for omega, m in mu.atoms:
        t = kappa(omega)
        if t is INFINITY:
            continue
        cells[X.at(omega, t)].append((shift(t, omega, c), m))
    laws = _normalize_cells(cells)

    def kernel(omega: AnyPath) -> FiniteMeasure:
        t = kappa(omega)
        if t is not INFINITY:
            law = laws.get(X.at(omega, t))
            if law is not None:
                return law
        key = truncate_at(omega, kappa)
        return fallback(key) if fallback is not None else _fallback_tail(key, kappa, c)

    return Kernel(kernel, name=f"state_cond[{kappa.name},{X.name}]")


# ==================== CSV ====================

def _path_rows(text: str) -> Tuple[str, List[List[str]]]:
    header, _, body = text.partition("\n")
    rows = [row for row in csv.reader(io.StringIO(body)) if row]
    return header, rows


def write_measure(mu: FiniteMeasure, file_path: Union[str, FilePath]) -> FilePath:
    """
    Мера в два файла: file_path с колонками (path_id, mass) и таблица путей
    <stem>.paths.csv. Все пути должны быть Path на одной сетке и одного вида.
    """
    file_path = FilePath(file_path)
    paths_file = file_path.with_name(file_path.stem + ".paths.csv")
    header = None
    table = io.StringIO()
    writer = csv.writer(table, lineterminator="\n", quoting=csv.QUOTE_NONNUMERIC)
    masses = io.StringIO()
    mass_writer = csv.writer(masses, lineterminator="\n")
    mass_writer.writerow(["path_id", "mass"])
    for path_id, (omega, m) in enumerate(mu.atoms):
        if not isinstance(omega, Path):
            raise UnsupportedKindError("Only measures on plain paths are serializable")
        path_header, rows = _path_rows(path_to_csv(omega))
        if header is None:
            header = path_header
            table.write(header + "\n")
            writer.writerow(["path_id"] + rows[0])
        elif path_header != header:
            raise UnsupportedKindError("All atoms of a serialized measure share one grid and kind")
        for row in rows[1:]:
            writer.writerow([path_id] + row)
        mass_writer.writerow([path_id, _encode_scalar(m)])
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        f.write(masses.getvalue())
    with open(paths_file, "w", newline="", encoding="utf-8") as f:
        f.write(table.getvalue())
    return paths_file


def read_measure(file_path: Union[str, FilePath], normalized: bool = True) -> FiniteMeasure:
    file_path = FilePath(file_path)
    paths_file = file_path.with_name(file_path.stem + ".paths.csv")
    with open(paths_file, newline="", encoding="utf-8") as f:
        header, table = _path_rows(f.read())
    columns = table[0][1:]
    rows: Dict[str, List[List[str]]] = defaultdict(list)
    for row in table[1:]:
        rows[row[0]].append(row[1:])
    atoms = []
    with open(file_path, newline="", encoding="utf-8") as f:
        mass_rows = list(csv.DictReader(f))
    for row in mass_rows:
        body = io.StringIO()
        body.write(header + "\n")
        csv.writer(body, lineterminator="\n", quoting=csv.QUOTE_NONNUMERIC).writerows([columns] + rows[row["path_id"]])
        atoms.append((path_from_csv(body.getvalue()), _decode_scalar(row["mass"])))
    return FiniteMeasure(tuple(atoms), normalized=normalized)
