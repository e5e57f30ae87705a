"""
Управляемая диффузия с поглощением на границе

Схема Эйлера–Маруямы по блокам путей, политики из конечного класса,
оценка функции цены Монте-Карло и проверка DPP в момент остановки.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import PreconditionError, SimulationError, UsageError
from core.measures import EmpiricalMeasure, RunningMoments
from core.pathspace import (
    INFINITY,
    CheckResult,
    Path,
    PathKind,
    StoppingTime,
    TimeGrid,
    as_fraction,
    is_non_anticipating,
)
from core.rng import block_normals, iter_blocks
from core.schemas import DiffusionConfig, MCDPPReport, ValueEstimate

logger = logging.getLogger(__name__)

# индекс момента остановки для τ = INFINITY
NEVER = -1

VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]
ValueFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _as_states(x: Any, dim: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, dim)


# ==================== ОБЛАСТЬ ====================

@dataclass(frozen=True)
class Box:
    """Открытый прямоугольник O = Π (low_i, high_i); границы могут быть бесконечными"""
    low: Tuple[float, ...]
    high: Tuple[float, ...]

    @classmethod
    def interval(cls, low: float, high: float) -> "Box":
        return cls((float(low),), (float(high),))

    @property
    def dim(self) -> int:
        return len(self.low)

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        """< 0 внутри O, 0 на ∂O, > 0 снаружи"""
        x = _as_states(x, self.dim)
        low = np.asarray(self.low)
        high = np.asarray(self.high)
        return np.max(np.maximum(low - x, x - high), axis=1)

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.signed_distance(x) < 0

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(_as_states(x, self.dim), self.low, self.high)


# ==================== УРАВНЕНИЕ ====================

@dataclass(frozen=True)
class ControlledSDE:
    """
    dξ = β(ξ, α) dt + σ(ξ, α) dW в O с поглощением на ∂O.

    drift: (N, n) состояний и (N,) значений меток -> (N, n);
    diffusion: -> (N, n, n). Оценки drift_bound/diffusion_bound - β̂, σ̂.
    """
    dim: int
    labels: Tuple[float, ...]
    drift: VectorField
    diffusion: VectorField
    domain: Box
    drift_bound: Optional[Callable[[np.ndarray], np.ndarray]] = None
    diffusion_bound: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "sde"

    def label_values(self, index: np.ndarray) -> np.ndarray:
        return np.asarray(self.labels, dtype=float)[np.asarray(index, dtype=int)]

    def beta(self, x: np.ndarray, a: Any) -> np.ndarray:
        x = _as_states(x, self.dim)
        return self.drift(x, np.broadcast_to(np.asarray(a, dtype=float), (len(x),)))

    def sigma(self, x: np.ndarray, a: Any) -> np.ndarray:
        x = _as_states(x, self.dim)
        return self.diffusion(x, np.broadcast_to(np.asarray(a, dtype=float), (len(x),)))

    def gamma(self, x: np.ndarray, a: Any) -> np.ndarray:
        """γ = σσᵀ"""
        s = self.sigma(x, a)
        return np.einsum("nik,njk->nij", s, s)


def check_envelopes(sde: ControlledSDE, xs: np.ndarray) -> CheckResult:
    """|βⁱ(x, a)| ≤ β̂(x) и |σⁱₖ(x, a)| ≤ σ̂(x) на выборке"""
    xs = _as_states(xs, sde.dim)
    checked = 0
    for a in sde.labels:
        if sde.drift_bound is not None:
            checked += 1
            excess = np.abs(sde.beta(xs, a)).max(axis=1) - sde.drift_bound(xs)
            if np.any(excess > 1e-12):
                i = int(np.argmax(excess))
                return CheckResult(False, (xs[i].tolist(), a), "drift exceeds its envelope", checked)
        if sde.diffusion_bound is not None:
            checked += 1
            excess = np.abs(sde.sigma(xs, a)).max(axis=(1, 2)) - sde.diffusion_bound(xs)
            if np.any(excess > 1e-12):
                i = int(np.argmax(excess))
                return CheckResult(False, (xs[i].tolist(), a), "diffusion exceeds its envelope", checked)
    return CheckResult(True, checked=checked)


# ==================== ВСТРОЕННАЯ БИБЛИОТЕКА ====================

def control_drift(scale: float = 1.0) -> VectorField:
    """β(x, a) = scale·a по каждой координате"""
    return lambda x, a: scale * np.repeat(a[:, None], x.shape[1], axis=1)


def constant_drift(scale: float = 1.0) -> VectorField:
    return lambda x, a: np.full_like(x, scale)


def ou_drift(scale: float = 1.0, target: float = 0.0) -> VectorField:
    """β(x, a) = scale·(target − x) + a"""
    return lambda x, a: scale * (target - x) + a[:, None]


def constant_diffusion(scale: float = 1.0) -> VectorField:
    def sigma(x: np.ndarray, a: np.ndarray) -> np.ndarray:
        return scale * np.broadcast_to(np.eye(x.shape[1]), (len(x), x.shape[1], x.shape[1])).copy()
    return sigma


def zero_diffusion() -> VectorField:
    return lambda x, a: np.zeros((len(x), x.shape[1], x.shape[1]))


@dataclass(frozen=True)
class Objective:
    """G(ξ) = g(ξ_horizon); g ограничена"""
    g: Callable[[np.ndarray], np.ndarray]
    name: str = "g"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.g(np.asarray(x, dtype=float).reshape(len(np.atleast_1d(x)), -1))

    def terminal(self, xi: np.ndarray) -> np.ndarray:
        return self.g(xi[:, -1, :])


def builtin_objective(name: str, width: float = 1.0) -> Objective:
    """bump = exp(−|x|²/w²), tent, capped_square, identity_clip"""
    def norm_sq(x: np.ndarray) -> np.ndarray:
        return np.sum(x * x, axis=1)

    if name == "bump":
        return Objective(lambda x: np.exp(-norm_sq(x) / width ** 2), name)
    if name == "tent":
        return Objective(lambda x: np.maximum(0.0, 1.0 - np.sqrt(norm_sq(x)) / width), name)
    if name == "capped_square":
        return Objective(lambda x: np.minimum(norm_sq(x), width ** 2), name)
    if name == "identity_clip":
        return Objective(lambda x: np.clip(x[:, 0], -width, width), name)
    raise UsageError(f"Unknown objective {name!r}. Valid: bump, tent, capped_square, identity_clip")


def build_sde(config: DiffusionConfig) -> ControlledSDE:
    """Уравнение из встроенной библиотеки по конфигурации"""
    labels = tuple(float(a) for a in config.labels)
    top = max(abs(a) for a in labels)
    if config.beta == "control":
        drift = control_drift(config.beta_scale)
        drift_bound = lambda x: np.full(len(x), abs(config.beta_scale) * top)
    elif config.beta == "constant":
        drift = constant_drift(config.beta_scale)
        drift_bound = lambda x: np.full(len(x), abs(config.beta_scale))
    else:
        drift = ou_drift(config.beta_scale, config.beta_target)
        drift_bound = lambda x: abs(config.beta_scale) * np.abs(config.beta_target - x).max(axis=1) + top
    if config.sigma == "constant":
        diffusion = constant_diffusion(config.sigma_scale)
        diffusion_bound = lambda x: np.full(len(x), config.sigma_scale)
    else:
        diffusion = zero_diffusion()
        diffusion_bound = lambda x: np.zeros(len(x))
    return ControlledSDE(
        dim=config.dim,
        labels=labels,
        drift=drift,
        diffusion=diffusion,
        domain=Box.interval(config.domain_low, config.domain_high),
        drift_bound=drift_bound,
        diffusion_bound=diffusion_bound,
        name=f"{config.beta}/{config.sigma}",
    )


def benchmark_sde() -> ControlledSDE:
    """β(x, a) = a, a ∈ {−1, 0, 1}, σ ≡ 1, O = (−2, 2)"""
    return build_sde(DiffusionConfig(seed=0))


# ==================== ПОЛИТИКИ ====================

class Policy(ABC):
    """
    Неупреждающее правило выбора метки.

    reset() заводит состояние по начальным точкам, choose() вызывается в
    каждой точке сетки t_k и видит только текущее состояние ξ_k
    (и накопленное в state прошлое).
    """
    name: str = "policy"

    def reset(self, x0: np.ndarray) -> Dict[str, Any]:
        return {}

    @abstractmethod
    def choose(self, t: float, x: np.ndarray, state: Dict[str, Any]) -> np.ndarray:
        ...


class ConstantPolicy(Policy):
    def __init__(self, index: int, name: Optional[str] = None):
        self.index = index
        self.name = name or f"const[{index}]"

    def choose(self, t: float, x: np.ndarray, state: Dict[str, Any]) -> np.ndarray:
        return np.full(len(x), self.index, dtype=int)


class FeedbackPolicy(Policy):
    """
    Движение к цели: метка с наибольшим β(x, a)·(target − x).

    В мёртвой зоне |target − x| ≤ dead_zone выбирается метка с наименьшим |a|.
    """

    def __init__(self, sde: ControlledSDE, target: float = 0.0, dead_zone: float = 0.0, name: Optional[str] = None):
        self.sde = sde
        self.target = target
        self.dead_zone = dead_zone
        self.rest = int(np.argmin(np.abs(np.asarray(sde.labels))))
        self.name = name or (f"feedback[{target}]" if dead_zone == 0 else f"feedback[{target},dz={dead_zone}]")

    def choose(self, t: float, x: np.ndarray, state: Dict[str, Any]) -> np.ndarray:
        direction = self.target - x
        scores = np.stack([
            np.sum(self.sde.beta(x, a) * direction, axis=1) for a in self.sde.labels
        ], axis=1)
        index = np.argmax(scores, axis=1)
        if self.dead_zone > 0:
            inside = np.sqrt(np.sum(direction * direction, axis=1)) <= self.dead_zone
            index = np.where(inside, self.rest, index)
        return index.astype(int)


class LocallyConstantPolicy(Policy):
    """Постоянная метка до выхода из шара радиуса radius вокруг ξ_0, затем after"""

    def __init__(self, index: int, radius: float, after: Policy, name: Optional[str] = None):
        self.index = index
        self.radius = radius
        self.after = after
        self.name = name or f"local[{index},{radius}]->{after.name}"

    def reset(self, x0: np.ndarray) -> Dict[str, Any]:
        return {
            "origin": np.array(x0, dtype=float),
            "exited": np.zeros(len(x0), dtype=bool),
            "after": self.after.reset(x0),
        }

    def choose(self, t: float, x: np.ndarray, state: Dict[str, Any]) -> np.ndarray:
        offset = x - state["origin"]
        state["exited"] |= np.sum(offset * offset, axis=1) >= self.radius ** 2
        later = self.after.choose(t, x, state["after"])
        return np.where(state["exited"], later, self.index).astype(int)


def default_policies(sde: ControlledSDE, target: float = 0.0, radius: float = 0.5) -> List[Policy]:
    """Постоянные, обратная связь (с мёртвой зоной и без) и локально постоянные"""
    feedback = FeedbackPolicy(sde, target)
    policies: List[Policy] = [ConstantPolicy(i) for i in range(len(sde.labels))]
    policies.append(feedback)
    policies.append(FeedbackPolicy(sde, target, dead_zone=radius / 5))
    policies.extend(LocallyConstantPolicy(i, radius, feedback) for i in range(len(sde.labels)))
    return policies


def replay_controls(policy: Policy, xi: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Метки политики вдоль заданных траекторий (N, K+1, n)"""
    times = grid.as_floats()
    state = policy.reset(xi[:, 0, :])
    alpha = np.zeros(xi.shape[:2], dtype=int)
    for k in range(grid.size):
        alpha[:, k] = policy.choose(float(times[k]), xi[:, k, :], state)
    return alpha


def check_policy_non_anticipating(policy: Policy, law: EmpiricalMeasure, limit: int = 10) -> CheckResult:
    """
    Метки пересчитываются по усечённым ξ: T̃_t(α(T_t ξ)) = T̃_t(α(ξ)).

    Дополнительно пересчёт по полному ξ совпадает с записанной α.
    """
    grid = law.grid
    dim = law["xi"].shape[2]
    labels = law.labels

    def controls(xi_path: Path) -> Path:
        xi = np.asarray(xi_path.values, dtype=float).reshape(1, grid.size, dim)
        index = replay_controls(policy, xi, grid)[0]
        return Path(grid, PathKind.CONTROL_CLASS, tuple(labels[i] for i in index), labels=labels)

    n = min(limit, law.n_samples)
    recorded = replay_controls(policy, law["xi"][:n], grid)
    mismatch = np.flatnonzero(np.any(recorded != law["alpha"][:n], axis=1))
    if len(mismatch):
        return CheckResult(False, int(mismatch[0]), "replayed controls differ from the recorded ones")
    sample = [law.path(i).component(0) for i in range(n)]
    return is_non_anticipating(controls, sample)


# ==================== СИМУЛЯЦИЯ ====================

def make_grid(horizon: float, dt: float) -> TimeGrid:
    return TimeGrid(as_fraction(horizon), as_fraction(dt))


def _simulate_block(
    sde: ControlledSDE,
    policy: Policy,
    x0: np.ndarray,
    grid: TimeGrid,
    seed: int,
    block: int,
    start: int,
    n_paths: int,
) -> Dict[str, np.ndarray]:
    dt = float(grid.step)
    times = grid.as_floats()
    noise = block_normals(seed, block, n_paths, grid.n_steps, sde.dim) * np.sqrt(dt)
    xi = np.zeros((n_paths, grid.size, sde.dim))
    alpha = np.zeros((n_paths, grid.size), dtype=int)
    absorbed = np.zeros((n_paths, grid.size), dtype=bool)

    x = np.repeat(x0[None, :], n_paths, axis=0)
    done = ~sde.domain.contains(x)
    xi[:, 0] = x
    absorbed[:, 0] = done
    state = policy.reset(x)
    for k in range(grid.n_steps):
        index = policy.choose(float(times[k]), x, state)
        alpha[:, k] = index
        a = sde.label_values(index)
        step = sde.drift(x, a) * dt + np.einsum("nij,nj->ni", sde.diffusion(x, a), noise[:, k, :])
        moved = np.where(done[:, None], x, x + step)
        bad = ~np.all(np.isfinite(moved), axis=1)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise SimulationError(
                f"Non-finite state at step {k} of path {start + i}. "
                f"Reduce dt or check the coefficients of {sde.name}.",
                seed=seed,
                path_index=start + i,
            )
        left = ~done & ~sde.domain.contains(moved)
        if np.any(left):
            moved[left] = sde.domain.project(moved[left])
        done = done | left
        x = moved
        xi[:, k + 1] = x
        absorbed[:, k + 1] = done
    alpha[:, grid.n_steps] = policy.choose(float(times[-1]), x, state)
    return {"xi": xi, "alpha": alpha, "absorbed": absorbed}


def iter_simulation(
    sde: ControlledSDE,
    policy: Policy,
    x0: Any,
    dt: float,
    horizon: float,
    n_paths: int,
    seed: int,
) -> Iterator[Tuple[int, Dict[str, np.ndarray]]]:
    """Потоковая симуляция: (начальный индекс, массивы блока) в порядке блоков"""
    grid = make_grid(horizon, dt)
    x0 = np.asarray(x0, dtype=float).reshape(sde.dim)
    if sde.domain.signed_distance(x0)[0] > 0:
        raise PreconditionError(f"Start point {x0.tolist()} lies outside the closure of the domain")
    for block, start, stop in iter_blocks(n_paths):
        yield start, _simulate_block(sde, policy, x0, grid, seed, block, start, stop - start)


def simulate(
    sde: ControlledSDE,
    policy: Policy,
    x0: Any,
    dt: float,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
) -> EmpiricalMeasure:
    """Слабое решение на пространстве путей (ξ, α) с индикатором поглощения"""
    blocks = [arrays for _, arrays in iter_simulation(sde, policy, x0, dt, horizon, n_paths, seed)]
    arrays = {name: np.concatenate([b[name] for b in blocks]) for name in blocks[0]}
    logger.debug(f"Simulated {n_paths} paths of {sde.name} under {policy.name} (seed {seed})")
    return EmpiricalMeasure(
        grid=make_grid(horizon, dt),
        seed=seed,
        arrays=arrays,
        kinds=(("xi", PathKind.CONTINUOUS_PL), ("alpha", PathKind.CONTROL_CLASS)),
        labels=tuple(sde.labels),
    )


# ==================== МОМЕНТЫ ОСТАНОВКИ ====================

@dataclass(frozen=True)
class TauSpec:
    """
    Момент остановки для проверок DPP: zero, const:t, horizon,
    ball_exit:r (inf{t : |ξ_t − ξ_0| ≥ r} ∧ r), hit:level.
    """
    kind: str
    param: Optional[float] = None

    KINDS = ("zero", "const", "horizon", "ball_exit", "hit")

    @classmethod
    def parse(cls, text: str) -> "TauSpec":
        kind, _, raw = text.strip().partition(":")
        if kind not in cls.KINDS:
            raise UsageError(f"Unknown stopping time {text!r}. Valid kinds: {', '.join(cls.KINDS)}")
        needs_param = kind in ("const", "ball_exit", "hit")
        if needs_param != bool(raw):
            raise UsageError(f"Stopping time {kind!r} {'needs' if needs_param else 'takes no'} parameter")
        return cls(kind, float(raw) if raw else None)

    def __str__(self) -> str:
        return self.kind if self.param is None else f"{self.kind}:{self.param:g}"

    def indices(self, xi: np.ndarray, grid: TimeGrid) -> np.ndarray:
        """Индексы сетки τ по траекториям (N, K+1, n); NEVER для τ = INFINITY"""
        n = len(xi)
        if self.kind == "zero":
            return np.zeros(n, dtype=int)
        if self.kind == "const":
            return np.full(n, grid.floor_index(self.param), dtype=int)
        if self.kind == "horizon":
            return np.full(n, grid.n_steps, dtype=int)
        if self.kind == "ball_exit":
            cap = grid.floor_index(self.param)
            offset = xi[:, :cap + 1, :] - xi[:, :1, :]
            hit = np.sum(offset * offset, axis=2) >= self.param ** 2
            return np.where(hit.any(axis=1), np.argmax(hit, axis=1), cap).astype(int)
        start = xi[:, 0, 0]
        above = np.where(start <= self.param, 1.0, -1.0)
        hit = (xi[:, :, 0] - self.param) * above[:, None] >= 0
        return np.where(hit.any(axis=1), np.argmax(hit, axis=1), NEVER).astype(int)

    def stopping_time(self) -> StoppingTime:
        """Тот же момент на путях пространства путей (ξ или (ξ, α))"""
        def rule(omega) -> Any:
            xi_path = omega.component(0) if hasattr(omega, "component") else omega
            xi = np.asarray(xi_path.values, dtype=float).reshape(1, xi_path.grid.size, -1)
            k = int(self.indices(xi, xi_path.grid)[0])
            return INFINITY if k == NEVER else xi_path.grid.time(k)
        return StoppingTime(rule, name=str(self))


# ==================== ФУНКЦИЯ ЦЕНЫ И DPP ====================

def _policy_moments(
    sde: ControlledSDE,
    policy: Policy,
    x0: Any,
    dt: float,
    horizon: float,
    n_paths: int,
    seed: int,
    functionals: Dict[str, Callable[[Dict[str, np.ndarray]], np.ndarray]],
) -> Dict[str, RunningMoments]:
    moments = {name: RunningMoments() for name in functionals}
    for _, arrays in iter_simulation(sde, policy, x0, dt, horizon, n_paths, seed):
        for name, functional in functionals.items():
            moments[name].add(functional(arrays))
    return moments


def estimate_value(
    sde: ControlledSDE,
    policies: Sequence[Policy],
    objective: Objective,
    x0: Any,
    dt: float,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
) -> ValueEstimate:
    """
    v̂(x0) = max по классу политик от средних G; одинаковый seed для
    всех политик (парные выборки). Оценка снизу для sup по всем слабым решениям.
    """
    per_policy: Dict[str, float] = {}
    best = None
    for policy in policies:
        moments = _policy_moments(
            sde, policy, x0, dt, horizon, n_paths, seed,
            {"G": lambda arrays: objective.terminal(arrays["xi"])},
        )
        estimate = moments["G"].estimate()
        per_policy[policy.name] = estimate.mean
        if best is None or estimate.mean > best[1].mean:
            best = (policy.name, estimate)
    name, estimate = best
    return ValueEstimate(value=estimate.mean, stderr=estimate.stderr, policy=name, per_policy=per_policy)


def check_dpp_mc(
    sde: ControlledSDE,
    policies: Sequence[Policy],
    objective: Objective,
    x0: Any,
    tau: TauSpec,
    value_fn: ValueFunction,
    dt: float,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
) -> MCDPPReport:
    """
    lhs = v̂(x0) по Монте-Карло; rhs = max по политикам среднего
    v̂(t_τ, ξ_τ) (G при τ = INFINITY, g при t_τ = horizon).

    value_fn(t, x) - опорная функция цены (например, ValueGrid).
    """
    grid = make_grid(horizon, dt)
    times = grid.as_floats()
    x0_arr = np.asarray(x0, dtype=float).reshape(1, sde.dim)

    def stopped(arrays: Dict[str, np.ndarray]) -> np.ndarray:
        xi = arrays["xi"]
        k = tau.indices(xi, grid)
        never = k == NEVER
        at_horizon = k == grid.n_steps
        safe = np.where(never, grid.n_steps, k)
        x_tau = xi[np.arange(len(xi)), safe, :]
        out = value_fn(times[safe], x_tau)
        terminal = objective(x_tau)
        return np.where(never | at_horizon, terminal, out)

    lhs_best = rhs_best = None
    for policy in policies:
        moments = _policy_moments(
            sde, policy, x0, dt, horizon, n_paths, seed,
            {
                "G": lambda arrays: objective.terminal(arrays["xi"]),
                "stopped": stopped,
            },
        )
        lhs, rhs = moments["G"].estimate(), moments["stopped"].estimate()
        if lhs_best is None or lhs.mean > lhs_best.mean:
            lhs_best = lhs
        if rhs_best is None or rhs.mean > rhs_best[1].mean:
            rhs_best = (policy.name, rhs)
    policy_name, rhs = rhs_best
    rhs_mean, rhs_se = rhs.mean, rhs.stderr
    if tau.kind == "zero":
        rhs_mean, rhs_se = float(value_fn(np.zeros(1), x0_arr)[0]), 0.0
    combined = float(np.sqrt(lhs_best.stderr ** 2 + rhs_se ** 2))
    diff = lhs_best.mean - rhs_mean
    z = 0.0 if combined == 0 else diff / combined
    report = MCDPPReport(
        x0=float(x0_arr[0, 0]),
        tau=str(tau),
        lhs=lhs_best.mean,
        lhs_stderr=lhs_best.stderr,
        rhs=rhs_mean,
        rhs_stderr=rhs_se,
        z=z,
        policy=policy_name,
    )
    logger.info(f"DPP at x0={report.x0:g}, tau={report.tau}: lhs={report.lhs:.5f} rhs={report.rhs:.5f} z={z:.2f}")
    return report


# ==================== ПРОГРЕССИВНАЯ ВЕРСИЯ УПРАВЛЕНИЯ ====================

def progressive_version(alpha: Path, n: float) -> Path:
    """
    Среднее φ(α) по окну ((t − 1/n)⁺, t), возвращённое к ближайшей метке
    (при равенстве - к метке с меньшим индексом). Результат - CaglladStep:
    values[k] - значение на (t_{k−1}, t_k], values[0] - метка первой ячейки.
    """
    if alpha.kind is not PathKind.CONTROL_CLASS:
        raise PreconditionError("progressive_version needs a control-class path")
    if n <= 0:
        raise PreconditionError(f"Window parameter must be positive, got {n}")
    grid = alpha.grid
    labels = alpha.labels
    phi = np.array([labels.index(v) for v in alpha.values], dtype=float)
    width = max(1, int(round(float(1 / (as_fraction(n) * grid.step)))))
    out = [alpha.values[0]]
    for k in range(1, grid.size):
        window = phi[max(0, k - width):k]
        mean = float(np.mean(window))
        distances = np.abs(np.arange(len(labels)) - mean)
        out.append(labels[int(np.argmin(distances))])
    return Path(grid, PathKind.CAGLAD_STEP, tuple(out))
