"""
Конечно-разностный оракул HJB и проверка вязкостных неравенств

Уравнение v_t + max_a [β(x, a) v_x + ½γ(x, a) v_xx] = 0 в (0, T) × O,
v = g на ∂O и при t = T. Размерность пространства - 1.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

from core.exceptions import CFLError, PreconditionError
from core.schemas import ViscosityReport

from .sde import ControlledSDE, Objective

logger = logging.getLogger(__name__)

CFL_SAFETY = 0.9


@dataclass
class ValueGrid:
    """Значения v(t_n, x_j) на пространственно-временной сетке"""
    t: np.ndarray
    x: np.ndarray
    values: np.ndarray
    scheme: str = "explicit"

    def __post_init__(self):
        self._interpolator = RegularGridInterpolator(
            (self.t, self.x), self.values, bounds_error=False, fill_value=None,
        )

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __call__(self, t, x) -> np.ndarray:
        """Билинейная интерполяция; x ограничивается отрезком сетки"""
        x = np.clip(np.asarray(x, dtype=float).reshape(-1), self.x[0], self.x[-1])
        t = np.broadcast_to(np.clip(np.asarray(t, dtype=float), self.t[0], self.t[-1]), x.shape)
        return self._interpolator(np.column_stack([t, x]))

    def with_values(self, values: np.ndarray) -> "ValueGrid":
        return ValueGrid(self.t, self.x, values, self.scheme)


def _space_grid(sde: ControlledSDE, h: float) -> np.ndarray:
    if sde.dim != 1:
        raise PreconditionError("The finite-difference oracle is one-dimensional")
    low, high = sde.domain.low[0], sde.domain.high[0]
    if not (math.isfinite(low) and math.isfinite(high)):
        raise PreconditionError("The finite-difference oracle needs a bounded interval")
    cells = int(round((high - low) / h))
    if cells < 2:
        raise PreconditionError(f"Space step {h} leaves fewer than two cells on ({low}, {high})")
    return np.linspace(low, high, cells + 1)


def _coefficients(sde: ControlledSDE, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """β и γ для всех меток: массивы (|A|, J+1)"""
    states = x[:, None]
    beta = np.stack([sde.beta(states, a)[:, 0] for a in sde.labels])
    gamma = np.stack([sde.gamma(states, a)[:, 0, 0] for a in sde.labels])
    return beta, gamma


def cfl_limit(sde: ControlledSDE, h: float) -> float:
    """Δt ≤ h² / (γ_max + |β|_max·h)"""
    x = _space_grid(sde, h)
    beta, gamma = _coefficients(sde, x)
    denominator = float(gamma.max() + np.abs(beta).max() * h)
    return math.inf if denominator == 0 else h * h / denominator


def _time_steps(horizon: float, dt: float) -> int:
    steps = horizon / dt
    n = int(round(steps))
    if abs(steps - n) > 1e-9 * max(1.0, steps):
        raise PreconditionError(f"Time step {dt} does not divide the horizon {horizon}")
    return n


def _upwind_terms(v: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    forward = (v[2:] - v[1:-1]) / h
    backward = (v[1:-1] - v[:-2]) / h
    second = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    return forward, backward, second


def hjb_solve(
    sde: ControlledSDE,
    objective: Objective,
    h: float,
    dt: Optional[float] = None,
    horizon: float = 1.0,
) -> ValueGrid:
    """
    Явная монотонная схема против потока:
    vⁿ = vⁿ⁺¹ + Δt·max_a [β⁺D⁺ − β⁻D⁻ + ½γD²] по строке n+1.

    Без dt берётся CFL_SAFETY от предельного шага (с округлением до делителя горизонта).
    """
    x = _space_grid(sde, h)
    h = float(x[1] - x[0])
    limit = cfl_limit(sde, h)
    if dt is None:
        steps = max(1, math.ceil(horizon / (CFL_SAFETY * limit))) if math.isfinite(limit) else 1
        dt = horizon / steps
    elif dt > limit * (1 + 1e-12):
        raise CFLError(
            f"Explicit scheme is unstable: dt={dt:g} exceeds the CFL limit {limit:g} for h={h:g}. "
            f"Use dt <= {limit:g} or the implicit scheme.",
            required_dt=limit,
        )
    steps = _time_steps(horizon, dt)
    beta, gamma = _coefficients(sde, x)
    bp, bm = np.maximum(beta, 0)[:, 1:-1], np.maximum(-beta, 0)[:, 1:-1]
    half_gamma = 0.5 * gamma[:, 1:-1]
    g = objective(x[:, None])

    values = np.zeros((steps + 1, len(x)))
    values[-1] = g
    for n in range(steps - 1, -1, -1):
        nxt = values[n + 1]
        forward, backward, second = _upwind_terms(nxt, h)
        rates = bp * forward - bm * backward + half_gamma * second
        values[n, 1:-1] = nxt[1:-1] + dt * rates.max(axis=0)
        values[n, 0], values[n, -1] = g[0], g[-1]
    t = np.linspace(0.0, horizon, steps + 1)
    logger.info(f"Explicit HJB solve: {len(x)} space nodes, {steps} time steps (dt={dt:.3e}, h={h:.3e})")
    return ValueGrid(t, x, values, scheme="explicit")


def _bands(beta: np.ndarray, gamma: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Коэффициенты L_a при v_{j−1} и v_{j+1}; на граничных узлах нули"""
    lower = np.maximum(-beta, 0) / h + 0.5 * gamma / (h * h)
    upper = np.maximum(beta, 0) / h + 0.5 * gamma / (h * h)
    lower[..., 0] = lower[..., -1] = upper[..., 0] = upper[..., -1] = 0.0
    return lower, upper


def _operator(lower: np.ndarray, upper: np.ndarray) -> sp.csr_matrix:
    """Трёхдиагональный L по строкам: (Lv)_j = l_j(v_{j−1} − v_j) + u_j(v_{j+1} − v_j)"""
    return sp.diags([lower[1:], -(lower + upper), upper[:-1]], [-1, 0, 1], format="csr")


def hjb_solve_implicit(
    sde: ControlledSDE,
    objective: Objective,
    h: float,
    dt: float,
    horizon: float = 1.0,
    max_policy_iterations: int = 50,
) -> ValueGrid:
    """Неявная схема с итерацией по политикам на каждом шаге (независимая сверка)"""
    x = _space_grid(sde, h)
    h = float(x[1] - x[0])
    steps = _time_steps(horizon, dt)
    beta, gamma = _coefficients(sde, x)
    lower, upper = _bands(beta, gamma, h)
    operators = [_operator(lower[a], upper[a]) for a in range(len(sde.labels))]
    columns = np.arange(len(x))
    g = objective(x[:, None])
    size = len(x)
    interior = np.arange(1, size - 1)
    eye = sp.identity(size, format="csr")

    values = np.zeros((steps + 1, size))
    values[-1] = g
    for n in range(steps - 1, -1, -1):
        rhs = values[n + 1].copy()
        rhs[0], rhs[-1] = g[0], g[-1]
        v = rhs.copy()
        policy = None
        for _ in range(max_policy_iterations):
            rates = np.stack([op @ v for op in operators])
            new_policy = rates.argmax(axis=0)
            if policy is not None and np.array_equal(new_policy[interior], policy[interior]):
                break
            policy = new_policy
            chosen = _operator(lower[policy, columns], upper[policy, columns])
            v = spsolve((eye - dt * chosen).tocsc(), rhs)
        else:
            logger.warning(f"Policy iteration did not settle at time step {n}")
        values[n] = v
    t = np.linspace(0.0, horizon, steps + 1)
    logger.info(f"Implicit HJB solve: {size} space nodes, {steps} time steps")
    return ValueGrid(t, x, values, scheme="implicit")


# ==================== ВЯЗКОСТНЫЕ ПРОВЕРКИ ====================

def viscosity_check(
    grid: ValueGrid,
    node: Tuple[int, int],
    r: int,
    sde: ControlledSDE,
    constant: float = 10.0,
) -> ViscosityReport:
    """
    Параболоиды φ = v̄ + p(t − t̄) + q(x − x̄) + ½Q(x − x̄)², касающиеся
    сетки снизу (Q* = min) и сверху (Q* = max) на r узлах в каждую сторону.

    p - разность вперёд по времени, q ∈ {D⁻, центральная, D⁺} и Q* берутся
    из строки n+1. Суперрешение: p + max_a G^a φ ≤ tol при всех q,
    субрешение: ≥ −tol. tol = C·(h + Δt).
    """
    n, j = node
    values = grid.values
    last_time, last_space = values.shape[0] - 1, values.shape[1] - 1
    if not 0 <= n < last_time:
        raise PreconditionError(f"Node time index {n} must lie before the terminal row {last_time}")
    if not 0 < j < last_space:
        raise PreconditionError(f"Node {j} is on the boundary; viscosity tests need an interior node")
    if r < 3:
        raise PreconditionError(f"Test radius must span at least 3 cells, got {r}")
    h, dt = grid.h, grid.dt
    row = values[n + 1]
    center = row[j]
    p = (row[j] - values[n, j]) / dt
    slopes = ((row[j] - row[j - 1]) / h, (row[j + 1] - row[j - 1]) / (2 * h), (row[j + 1] - row[j]) / h)

    offsets = np.array([k for k in range(-r, r + 1) if k != 0 and 0 <= j + k <= last_space])
    dx = offsets * h
    x_bar = np.array([[grid.x[j]]])
    h_super = -math.inf
    h_sub = math.inf
    for q in slopes:
        quotients = 2 * (row[j + offsets] - center - q * dx) / dx ** 2
        for Q, is_super in ((quotients.min(), True), (quotients.max(), False)):
            ham = max(
                float(sde.beta(x_bar, a)[0, 0] * q + 0.5 * sde.gamma(x_bar, a)[0, 0, 0] * Q)
                for a in sde.labels
            )
            if is_super:
                h_super = max(h_super, p + ham)
            else:
                h_sub = min(h_sub, p + ham)
    tolerance = constant * (h + dt)
    return ViscosityReport(
        node=(n, j),
        t=float(grid.t[n]),
        x=float(grid.x[j]),
        supersolution=h_super <= tolerance,
        subsolution=h_sub >= -tolerance,
        h_super=h_super,
        h_sub=h_sub,
        tolerance=tolerance,
    )


def viscosity_sweep(
    grid: ValueGrid,
    sde: ControlledSDE,
    r: int = 3,
    constant: float = 10.0,
    time_stride: int = 1,
) -> Tuple[int, Optional[ViscosityReport]]:
    """Проверка во всех внутренних узлах; (число проверенных, первый провал)"""
    checked = 0
    for n in range(0, grid.values.shape[0] - 1, time_stride):
        for j in range(1, grid.values.shape[1] - 1):
            report = viscosity_check(grid, (n, j), r, sde, constant)
            checked += 1
            if not (report.supersolution and report.subsolution):
                return checked, report
    return checked, None
