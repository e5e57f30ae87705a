"""
Монотонное преследование: левый интеграл, его характеризация и классическая модель

Управление α - неубывающий CaglladStep-путь; приращение Δα_k = α_{k+1} − α_k
приложено в момент t_k+ (Δα_0 - начальный скачок).
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.concat import ADJUSTED, STRICT, concat
from core.exceptions import GridMismatchError, PreconditionError, StrategyError
from core.measures import EmpiricalMeasure, RunningMoments
from core.pathspace import CheckResult, Path, PathKind, TimeGrid, Time, as_fraction, is_non_anticipating
from core.rng import block_normals, iter_blocks
from core.schemas import FollowerConfig, MCDPPReport

logger = logging.getLogger(__name__)


# ==================== ЛЕВЫЙ ИНТЕГРАЛ ====================

def plus_envelope(alpha: Path) -> Path:
    """α⁺_k = α_{k+1}, α⁺_K = α_K (CadlagStep)"""
    values = alpha.values[1:] + alpha.values[-1:]
    return Path(alpha.grid, PathKind.CADLAG_STEP, values)


def _left_sums(gamma: Sequence[Any], alpha: Sequence[Any]) -> List[Any]:
    # ζ_k = Σ_{j<k} γ_j (α_{j+1} − α_j), суммирование по порядку
    out = [0 * gamma[0]]
    total = out[0]
    for j in range(len(alpha) - 1):
        total = total + gamma[j] * (alpha[j + 1] - alpha[j])
        out.append(total)
    return out


def left_integral(gamma: Path, alpha: Path, t: Time) -> Any:
    """γ(0)Δα_0 + ∫_{(0,t)} γ dα⁺ на сетке"""
    if gamma.grid != alpha.grid:
        raise GridMismatchError("Integrand and control live on different grids")
    k = alpha.grid.index(t)
    return _left_sums(gamma.values, alpha.values)[k]


def left_integral_path(gamma: Path, alpha: Path) -> Path:
    """t ↦ ∫ γ dα как CaglladStep-путь (неубывающий при γ ≥ 0)"""
    if gamma.grid != alpha.grid:
        raise GridMismatchError("Integrand and control live on different grids")
    values = _left_sums(gamma.values, alpha.values)
    monotone = all(g >= 0 for g in gamma.values) and all(a <= b for a, b in zip(alpha.values, alpha.values[1:]))
    return Path(alpha.grid, PathKind.CAGLAD_STEP, tuple(values), nondecreasing=monotone)


def _close(a: Any, b: Any, tolerance: float) -> bool:
    if tolerance == 0:
        return a == b
    return abs(a - b) <= tolerance


def left_integral_characterization(zeta: Path, gamma: Path, alpha: Path, tolerance: float = 0.0) -> CheckResult:
    """
    ζ_0 = 0, Δζ_{0+} = γ(0)Δα_{0+} и для всех r < s
    min_{[r,s]}γ·(α⁺_s − α⁺_r) ≤ ζ⁺_s − ζ⁺_r ≤ max_{[r,s]}γ·(α⁺_s − α⁺_r).
    """
    if not (zeta.grid == gamma.grid == alpha.grid):
        raise GridMismatchError("zeta, gamma and alpha must share a grid")
    z, g, a = zeta.values, gamma.values, alpha.values
    if not _close(z[0], 0, tolerance):
        return CheckResult(False, 0, f"zeta starts at {z[0]}, not 0")
    z_plus = z[1:] + z[-1:]
    a_plus = a[1:] + a[-1:]
    if not _close(z_plus[0] - z[0], g[0] * (a_plus[0] - a[0]), tolerance):
        return CheckResult(False, 0, "initial jump of zeta differs from gamma(0) times the jump of alpha")
    checked = 1
    size = len(z)
    for r in range(size):
        low = high = g[r]
        for s in range(r + 1, size):
            low, high = min(low, g[s]), max(high, g[s])
            checked += 1
            da = a_plus[s] - a_plus[r]
            dz = z_plus[s] - z_plus[r]
            if dz < low * da - tolerance or dz > high * da + tolerance:
                return CheckResult(False, (r, s), f"increment {dz} outside [{low * da}, {high * da}]", checked)
    return CheckResult(True, checked=checked)


def check_bookkeeping(
    coupling: Callable[[Any], Any],
    omega: Tuple[Path, Path],
    t: Time,
    omega2: Tuple[Path, Path],
) -> CheckResult:
    """
    Для (Y, α): C = ∫ c(Y) dα у склейки (Y строго, α со сдвигом) равна
    сдвинутой склейке C(ω) и C(ω′); проверяются также
    C_s − C_{t+} = C′_{s−t} − C′_{0+} и C_{t+} − C_t = c(Y_t)(α_{t+} − α_t).
    """
    y, alpha = omega
    y2, alpha2 = omega2
    if not STRICT.compat(y, t, y2):
        raise PreconditionError("Continuous components are not compatible at the splice time")

    def cost(y_path: Path, a_path: Path) -> Path:
        gamma = Path(y_path.grid, PathKind.CADLAG_STEP, tuple(coupling(v) for v in y_path.values))
        return left_integral_path(gamma, a_path)

    joined = cost(concat(y, t, y2, STRICT), concat(alpha, t, alpha2, ADJUSTED))
    c1, c2 = cost(y, alpha), cost(y2, alpha2)
    if joined != concat(c1, t, c2, ADJUSTED):
        return CheckResult(False, (omega, t, omega2), "cost of the spliced path is not the spliced cost")
    grid = y.grid
    i = grid.index(t)
    n = grid.n_steps
    if i < n:
        jump = joined.values[i + 1] - joined.values[i]
        expected = coupling(y.values[i]) * (concat(alpha, t, alpha2, ADJUSTED).values[i + 1] - alpha.values[i])
        if jump != expected:
            return CheckResult(False, (omega, t, omega2), "initial jump identity fails")
        for s in range(i + 1, n + 1):
            if joined.values[s] - joined.values[i + 1] != c2.values[s - i] - c2.values[1]:
                return CheckResult(False, (omega, t, omega2, s), "increment identity fails")
    return CheckResult(True, checked=1)


# ==================== КЛАССИЧЕСКАЯ МОДЕЛЬ ====================

@dataclass(frozen=True)
class FollowerInstance:
    """
    Y = (T, W, H), Z = (L, C), c(y) = (1, f(T)).

    dW = μ dt + s dB, dL = dα, dC = f(t) dα, dH = h(t, W − L) dt;
    стоимость G = H_T + C_T + g(W_T − L_T) минимизируется.
    """
    drift: float = 0.0
    volatility: float = 1.0
    fuel_price: float = 0.5
    fuel: str = "constant"
    running_weight: float = 1.0
    terminal_weight: float = 1.0
    horizon: float = 1.0

    def f(self, t: Any) -> Any:
        if self.fuel == "decaying":
            return self.fuel_price * np.exp(-np.asarray(t, dtype=float))
        return self.fuel_price + 0 * np.asarray(t, dtype=float)

    def h(self, t: Any, d: np.ndarray) -> np.ndarray:
        return self.running_weight * d * d

    def g(self, d: np.ndarray) -> np.ndarray:
        return self.terminal_weight * d * d

    def coupling(self, t: Any) -> Tuple[float, float]:
        """c(y) = (1, f(T)) ≥ 0"""
        return 1.0, float(self.f(t))

    @classmethod
    def from_config(cls, config: FollowerConfig) -> "FollowerInstance":
        return cls(
            drift=config.drift,
            volatility=config.volatility,
            fuel_price=config.fuel_price,
            fuel=config.fuel,
            running_weight=config.running_weight,
            terminal_weight=config.terminal_weight,
            horizon=config.horizon,
        )


# ==================== СТРАТЕГИИ ====================

class Strategy(ABC):
    """Правило Δα_k ≥ 0 по (t_k, W_k, L_k); решение в t_k действует на (t_k, t_{k+1}]"""
    name: str = "strategy"

    @abstractmethod
    def push(self, k: int, t: float, w: np.ndarray, l: np.ndarray) -> np.ndarray:
        ...


class NullStrategy(Strategy):
    name = "null"

    def push(self, k: int, t: float, w: np.ndarray, l: np.ndarray) -> np.ndarray:
        return np.zeros_like(w)


class BarrierStrategy(Strategy):
    """Отражение на решётке: при d = W − L > b толчок δ·ceil((d − b)/δ)"""

    def __init__(self, barrier: float, delta: float):
        self.barrier = barrier
        self.delta = delta
        self.name = f"barrier[{barrier:g}]"

    def push(self, k: int, t: float, w: np.ndarray, l: np.ndarray) -> np.ndarray:
        excess = w - l - self.barrier
        return np.where(excess > 0, self.delta * np.ceil(excess / self.delta), 0.0)


class ImpulseStrategy(Strategy):
    """Один толчок в момент 0 до уровня d ≤ target"""

    def __init__(self, delta: float, target: float = 0.0):
        self.delta = delta
        self.target = target
        self.name = f"impulse[{target:g}]"

    def push(self, k: int, t: float, w: np.ndarray, l: np.ndarray) -> np.ndarray:
        if k > 0:
            return np.zeros_like(w)
        excess = w - l - self.target
        return np.where(excess > 0, self.delta * np.ceil(excess / self.delta), 0.0)


class TableStrategy(Strategy):
    """Толчки из таблицы (k, узел сетки d) - политика DP-оракула"""

    def __init__(self, d_grid: np.ndarray, pushes: np.ndarray, name: str = "dp"):
        self.d_grid = d_grid
        self.pushes = pushes
        self.name = name

    def push(self, k: int, t: float, w: np.ndarray, l: np.ndarray) -> np.ndarray:
        d = w - l
        h = self.d_grid[1] - self.d_grid[0]
        j = np.clip(np.rint((d - self.d_grid[0]) / h).astype(int), 0, len(self.d_grid) - 1)
        return self.pushes[min(k, len(self.pushes) - 1), j]


class ScriptedStrategy(Strategy):
    """Заданные толчки по шагам (одинаковые для всех путей)"""

    def __init__(self, pushes: Dict[int, float], name: str = "scripted"):
        self.pushes = pushes
        self.name = name

    def push(self, k: int, t: float, w: np.ndarray, l: np.ndarray) -> np.ndarray:
        return np.full_like(w, self.pushes.get(k, 0.0))


def default_strategies(config: FollowerConfig) -> List[Strategy]:
    strategies: List[Strategy] = [NullStrategy(), ImpulseStrategy(config.delta)]
    strategies.extend(BarrierStrategy(b, config.delta) for b in config.barriers)
    return strategies


# ==================== СИМУЛЯЦИЯ ====================

FOLLOWER_KINDS = (
    ("w", PathKind.CONTINUOUS_PL),
    ("h", PathKind.CONTINUOUS_PL),
    ("l", PathKind.CAGLAD_STEP),
    ("c", PathKind.CAGLAD_STEP),
    ("alpha", PathKind.CAGLAD_STEP),
)


def make_grid(horizon: float, dt: float) -> TimeGrid:
    return TimeGrid(as_fraction(horizon), as_fraction(dt))


def _simulate_block(
    inst: FollowerInstance,
    strategy: Strategy,
    x0: float,
    grid: TimeGrid,
    seed: int,
    block: int,
    n_paths: int,
) -> Dict[str, np.ndarray]:
    dt = float(grid.step)
    times = grid.as_floats()
    noise = block_normals(seed, block, n_paths, grid.n_steps, 1)[:, :, 0] * math.sqrt(dt)
    shape = (n_paths, grid.size)
    w, h, l, c, alpha = (np.zeros(shape) for _ in range(5))
    w[:, 0] = x0
    for k in range(grid.n_steps):
        t = float(times[k])
        proposed = np.asarray(strategy.push(k, t, w[:, k], l[:, k]), dtype=float)
        if np.any(proposed < 0):
            raise StrategyError(
                f"Strategy {strategy.name} proposed a negative increment {float(proposed.min())} at step {k}"
            )
        alpha[:, k + 1] = alpha[:, k] + proposed
        increment = alpha[:, k + 1] - alpha[:, k]
        _, fuel = inst.coupling(t)
        l[:, k + 1] = l[:, k] + 1.0 * increment
        c[:, k + 1] = c[:, k] + fuel * increment
        h[:, k + 1] = h[:, k] + inst.h(t, w[:, k] - l[:, k + 1]) * dt
        w[:, k + 1] = w[:, k] + inst.drift * dt + inst.volatility * noise[:, k]
    return {"w": w, "h": h, "l": l, "c": c, "alpha": alpha}


def iter_follower(
    inst: FollowerInstance,
    strategy: Strategy,
    x0: float,
    dt: float,
    n_paths: int,
    seed: int,
) -> Iterator[Dict[str, np.ndarray]]:
    grid = make_grid(inst.horizon, dt)
    for block, start, stop in iter_blocks(n_paths):
        yield _simulate_block(inst, strategy, x0, grid, seed, block, stop - start)


def simulate_follower(
    inst: FollowerInstance,
    strategy: Strategy,
    x0: float,
    dt: float,
    n_paths: int,
    seed: int,
) -> EmpiricalMeasure:
    """Пути (W, H, L, C, α); Z обновляется левым интегралом c(Y) dα"""
    blocks = list(iter_follower(inst, strategy, x0, dt, n_paths, seed))
    arrays = {name: np.concatenate([b[name] for b in blocks]) for name in blocks[0]}
    return EmpiricalMeasure(grid=make_grid(inst.horizon, dt), seed=seed, arrays=arrays, kinds=FOLLOWER_KINDS)


def follower_cost(inst: FollowerInstance, arrays: Dict[str, np.ndarray]) -> np.ndarray:
    """G = H_T + C_T + g(W_T − L_T)"""
    return arrays["h"][:, -1] + arrays["c"][:, -1] + inst.g(arrays["w"][:, -1] - arrays["l"][:, -1])


def replay_pushes(strategy: Strategy, w: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """α по заданным траекториям W (N, K+1)"""
    times = grid.as_floats()
    alpha = np.zeros_like(w)
    l = np.zeros_like(w)
    for k in range(grid.n_steps):
        alpha[:, k + 1] = alpha[:, k] + strategy.push(k, float(times[k]), w[:, k], l[:, k])
        l[:, k + 1] = l[:, k] + (alpha[:, k + 1] - alpha[:, k])
    return alpha


def check_strategy_non_anticipating(strategy: Strategy, law: EmpiricalMeasure, limit: int = 10) -> CheckResult:
    """T_t(α(T_t W)) = T_t(α(W)) на первых limit путях"""
    grid = law.grid

    def controls(w_path: Path) -> Path:
        w = np.asarray(w_path.values, dtype=float)[None, :]
        return Path(grid, PathKind.CAGLAD_STEP, tuple(float(v) for v in replay_pushes(strategy, w, grid)[0]))

    sample = [law.path(i).component(0) for i in range(min(limit, law.n_samples))]
    return is_non_anticipating(controls, sample)


def check_left_integral_pathwise(inst: FollowerInstance, law: EmpiricalMeasure) -> CheckResult:
    """L и C каждого пути совпадают с левым интегралом c(Y) по α точно"""
    grid = law.grid
    fuel = np.array([inst.coupling(float(t))[1] for t in grid.as_floats()])
    alpha = law["alpha"]
    for i in range(law.n_samples):
        a = alpha[i]
        expected_l = _left_sums([1.0] * grid.size, list(a))
        expected_c = _left_sums(list(fuel), list(a))
        if list(law["l"][i]) != expected_l or list(law["c"][i]) != expected_c:
            return CheckResult(False, i, "Z differs from the left integral of c(Y) against alpha", i + 1)
    return CheckResult(True, checked=law.n_samples)


# ==================== ЦЕНА И DPP ====================

@dataclass(frozen=True)
class StrategyValue:
    mean: float
    stderr: float
    strategy: str
    per_strategy: Dict[str, float]


def estimate_follower_value(
    inst: FollowerInstance,
    strategies: Sequence[Strategy],
    x0: float,
    dt: float,
    n_paths: int,
    seed: int,
) -> StrategyValue:
    """min по классу стратегий средней стоимости (парные выборки)"""
    per_strategy: Dict[str, float] = {}
    best = None
    for strategy in strategies:
        moments = RunningMoments()
        for arrays in iter_follower(inst, strategy, x0, dt, n_paths, seed):
            moments.add(follower_cost(inst, arrays))
        estimate = moments.estimate()
        per_strategy[strategy.name] = estimate.mean
        if best is None or estimate.mean < best[1].mean:
            best = (strategy.name, estimate)
    name, estimate = best
    return StrategyValue(estimate.mean, estimate.stderr, name, per_strategy)


def exit_indices(arrays: Dict[str, np.ndarray], radius: float) -> np.ndarray:
    """Первый k с |W_k − L_k| ≥ r; −1, если такого нет"""
    hit = np.abs(arrays["w"] - arrays["l"]) >= radius
    return np.where(hit.any(axis=1), np.argmax(hit, axis=1), -1)


def check_dpp_follower(
    inst: FollowerInstance,
    strategies: Sequence[Strategy],
    x0: float,
    value_fn: Callable[[int, np.ndarray], np.ndarray],
    dt: float,
    n_paths: int,
    seed: int,
    radius: Optional[float] = None,
    tau: str = "exit",
) -> MCDPPReport:
    """
    Форма inf: lhs = min E[G], rhs = min E[H_τ + C_τ + V_τ(W_τ − L_τ)]
    (G при τ = INFINITY). value_fn(k, d) - функция цены оракула в момент t_k.

    tau: "exit" (первый выход |W − L| ≥ radius), "zero" или "horizon".
    """
    if tau not in ("exit", "zero", "horizon"):
        raise PreconditionError(f"Unknown stopping rule {tau!r}; expected exit, zero or horizon")
    if tau == "exit" and (radius is None or radius <= 0):
        raise PreconditionError("The exit stopping time needs a positive radius")
    grid = make_grid(inst.horizon, dt)

    def stopped(arrays: Dict[str, np.ndarray]) -> np.ndarray:
        n = len(arrays["w"])
        if tau == "zero":
            k = np.zeros(n, dtype=int)
        elif tau == "horizon":
            k = np.full(n, grid.n_steps)
        else:
            k = exit_indices(arrays, radius)
        never = k < 0
        safe = np.where(never, grid.n_steps, k)
        rows = np.arange(n)
        d = arrays["w"][rows, safe] - arrays["l"][rows, safe]
        future = np.empty(n)
        for step in np.unique(safe):
            mask = safe == step
            future[mask] = value_fn(int(step), d[mask])
        value = arrays["h"][rows, safe] + arrays["c"][rows, safe] + future
        return np.where(never, follower_cost(inst, arrays), value)

    lhs_best = rhs_best = None
    for strategy in strategies:
        lhs_m, rhs_m = RunningMoments(), RunningMoments()
        for arrays in iter_follower(inst, strategy, x0, dt, n_paths, seed):
            lhs_m.add(follower_cost(inst, arrays))
            rhs_m.add(stopped(arrays))
        lhs, rhs = lhs_m.estimate(), rhs_m.estimate()
        if lhs_best is None or lhs.mean < lhs_best.mean:
            lhs_best = lhs
        if rhs_best is None or rhs.mean < rhs_best[1].mean:
            rhs_best = (strategy.name, rhs)
    name, rhs = rhs_best
    rhs_mean, rhs_se = rhs.mean, rhs.stderr
    if tau == "zero":
        rhs_mean, rhs_se = float(value_fn(0, np.array([x0]))[0]), 0.0
    combined = math.sqrt(lhs_best.stderr ** 2 + rhs_se ** 2)
    z = 0.0 if combined == 0 else (lhs_best.mean - rhs_mean) / combined
    tau_id = f"exit:{radius:g}" if tau == "exit" else tau
    logger.info(f"Follower DPP at x0={x0:g}, tau={tau_id}: lhs={lhs_best.mean:.5f} rhs={rhs_mean:.5f} z={z:.2f}")
    return MCDPPReport(
        x0=float(x0),
        tau=tau_id,
        lhs=lhs_best.mean,
        lhs_stderr=lhs_best.stderr,
        rhs=rhs_mean,
        rhs_stderr=rhs_se,
        z=z,
        policy=name,
        orientation="inf",
    )
