"""
Генератор, гамильтониан, семейство QCoord и мартингальные невязки
"""
import logging
from dataclasses import dataclass
from typing import Any, Callable, List, Optional

import numpy as np
from scipy import stats

from core.exceptions import PreconditionError
from core.measures import EmpiricalMeasure
from core.schemas import ResidualReport

from .sde import ControlledSDE, _as_states

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestFunction:
    """Дважды дифференцируемая f с градиентом и гессианом: (N, n) -> (N,), (N, n), (N, n, n)"""
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    name: str = "f"

    __test__ = False

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)


def numeric_test_function(f: Callable[[np.ndarray], np.ndarray], h: float = 1e-4, name: str = "f") -> TestFunction:
    """Градиент и гессиан центральными разностями с шагом h"""
    def grad(x: np.ndarray) -> np.ndarray:
        n = x.shape[1]
        out = np.zeros_like(x)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            out[:, i] = (f(x + e) - f(x - e)) / (2 * h)
        return out

    def hess(x: np.ndarray) -> np.ndarray:
        n = x.shape[1]
        out = np.zeros((len(x), n, n))
        for i in range(n):
            for j in range(n):
                ei = np.zeros(n)
                ej = np.zeros(n)
                ei[i] = h
                ej[j] = h
                out[:, i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
        return out

    return TestFunction(f, grad, hess, name)


def quadratic(a: float = 1.0, b: float = 0.0, c: float = 0.0) -> TestFunction:
    """f(x) = a·x² + b·x + c в размерности 1"""
    return TestFunction(
        value=lambda x: a * x[:, 0] ** 2 + b * x[:, 0] + c,
        grad=lambda x: (2 * a * x[:, 0] + b)[:, None],
        hess=lambda x: np.full((len(x), 1, 1), 2 * a),
        name=f"quad[{a},{b},{c}]",
    )


# ==================== ГЕНЕРАТОР ====================

def generator(f: TestFunction, x: Any, a: Any, sde: ControlledSDE) -> np.ndarray:
    """(G^a f)(x) = βⁱ ∂ᵢf + ½ γ^{ij} ∂ᵢⱼf"""
    x = _as_states(x, sde.dim)
    first = np.sum(sde.beta(x, a) * f.grad(x), axis=1)
    second = 0.5 * np.einsum("nij,nij->n", sde.gamma(x, a), f.hess(x))
    return first + second


def hamiltonian(f: TestFunction, x: Any, sde: ControlledSDE) -> np.ndarray:
    """Hf(x) = max_a G^a f(x)"""
    return np.max(np.stack([generator(f, x, a, sde) for a in sde.labels]), axis=0)


# ==================== QCOORD ====================

def _smoothstep(s: np.ndarray):
    # 6s⁵ − 15s⁴ + 10s³ и две производные
    s = np.clip(s, 0.0, 1.0)
    value = s ** 3 * (10 - 15 * s + 6 * s * s)
    first = 30 * s * s * (1 - s) ** 2
    second = 60 * s * (1 - s) * (1 - 2 * s)
    return value, first, second


def cutoff(radius: float) -> TestFunction:
    """χ = 1 на шаре радиуса R, 0 вне 2R, класс C²"""
    if radius <= 0:
        raise PreconditionError(f"Cutoff radius must be positive, got {radius}")

    def parts(x: np.ndarray):
        r = np.sqrt(np.sum(x * x, axis=1))
        s, ds, dds = _smoothstep((r - radius) / radius)
        return r, 1 - s, -ds / radius, -dds / radius ** 2

    def value(x: np.ndarray) -> np.ndarray:
        return parts(x)[1]

    def grad(x: np.ndarray) -> np.ndarray:
        r, _, d1, _ = parts(x)
        safe = np.where(r > 0, r, 1.0)
        return (d1 / safe)[:, None] * x

    def hess(x: np.ndarray) -> np.ndarray:
        r, _, d1, d2 = parts(x)
        safe = np.where(r > 0, r, 1.0)
        n = x.shape[1]
        outer = np.einsum("ni,nj->nij", x, x) / (safe ** 2)[:, None, None]
        eye = np.broadcast_to(np.eye(n), (len(x), n, n))
        return d2[:, None, None] * outer + (d1 / safe)[:, None, None] * (eye - outer)

    return TestFunction(value, grad, hess, name=f"cutoff[{radius}]")


def _times_cutoff(f: TestFunction, chi: TestFunction) -> TestFunction:
    def value(x: np.ndarray) -> np.ndarray:
        return chi.value(x) * f.value(x)

    def grad(x: np.ndarray) -> np.ndarray:
        return chi.grad(x) * f.value(x)[:, None] + chi.value(x)[:, None] * f.grad(x)

    def hess(x: np.ndarray) -> np.ndarray:
        gc, gf = chi.grad(x), f.grad(x)
        cross = np.einsum("ni,nj->nij", gc, gf)
        return (
            chi.hess(x) * f.value(x)[:, None, None]
            + cross + np.transpose(cross, (0, 2, 1))
            + chi.value(x)[:, None, None] * f.hess(x)
        )

    return TestFunction(value, grad, hess, name=f.name)


def coordinate(i: int, n: int) -> TestFunction:
    e = np.eye(n)[i]
    return TestFunction(
        value=lambda x: x[:, i],
        grad=lambda x: np.broadcast_to(e, x.shape).copy(),
        hess=lambda x: np.zeros((len(x), n, n)),
        name=f"x{i}",
    )


def coordinate_product(i: int, j: int, n: int) -> TestFunction:
    h = np.zeros((n, n))
    h[i, j] += 1
    h[j, i] += 1

    def grad(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        out[:, i] += x[:, j]
        out[:, j] += x[:, i]
        return out

    return TestFunction(
        value=lambda x: x[:, i] * x[:, j],
        grad=grad,
        hess=lambda x: np.broadcast_to(h, (len(x), n, n)).copy(),
        name=f"x{i}x{j}",
    )


def qcoord_family(n: int, radius: float) -> List[TestFunction]:
    """{xᵢ, xᵢxⱼ}·χ_R: n + n² функций"""
    chi = cutoff(radius)
    family = [_times_cutoff(coordinate(i, n), chi) for i in range(n)]
    family.extend(_times_cutoff(coordinate_product(i, j, n), chi) for i in range(n) for j in range(n))
    return family


# ==================== МАРТИНГАЛЬНЫЕ НЕВЯЗКИ ====================

def _wald_z(y: np.ndarray, features: np.ndarray) -> float:
    """Проверка E[y | признаки] = 0: робастная статистика Вальда, пересчитанная в z"""
    coef, *_ = np.linalg.lstsq(features, y, rcond=None)
    resid = y - features @ coef
    bread = np.linalg.pinv(features.T @ features)
    meat = features.T @ (features * (resid * resid)[:, None])
    cov = bread @ meat @ bread
    rank = np.linalg.matrix_rank(cov)
    if rank == 0:
        return 0.0
    wald = float(coef @ np.linalg.pinv(cov) @ coef)
    p = float(stats.chi2.sf(wald, rank))
    return float(stats.norm.isf(max(p, 1e-300) / 2))


def martingale_process(
    sde: ControlledSDE,
    law: EmpiricalMeasure,
    f: TestFunction,
    generator_sde: Optional[ControlledSDE] = None,
) -> np.ndarray:
    """M_k = f(ξ_k) − f(ξ_0) − Σ_{j<k, ξ_j ∈ O} G^{α_j} f(ξ_j) Δt, массив (N, K+1)"""
    model = generator_sde or sde
    xi, alpha, absorbed = law["xi"], law["alpha"], law["absorbed"]
    n_paths, size, dim = xi.shape
    dt = float(law.grid.step)
    flat = xi.reshape(-1, dim)
    a = sde.label_values(alpha.reshape(-1))
    drift = np.sum(model.drift(flat, a) * f.grad(flat), axis=1)
    diffusion = model.diffusion(flat, a)
    gamma = np.einsum("nik,njk->nij", diffusion, diffusion)
    rate = (drift + 0.5 * np.einsum("nij,nij->n", gamma, f.hess(flat))).reshape(n_paths, size)
    rate = np.where(absorbed, 0.0, rate)
    integral = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(rate[:, :-1] * dt, axis=1)], axis=1)
    values = f.value(flat).reshape(n_paths, size)
    return values - values[:, :1] - integral


def martingale_residual(
    sde: ControlledSDE,
    law: EmpiricalMeasure,
    f: TestFunction,
    n_intervals: int = 8,
    generator_sde: Optional[ControlledSDE] = None,
) -> ResidualReport:
    """
    Приращения M на грубом разбиении регрессируются на [1, ξ_s, ξ_s²]
    (прошлое в начале интервала); z - из статистики Вальда.

    generator_sde подменяет коэффициенты генератора (проверка на
    заведомо неверном сносе).
    """
    M = martingale_process(sde, law, f, generator_sde)
    xi = law["xi"]
    n_steps = law.grid.n_steps
    n_intervals = max(1, min(n_intervals, n_steps))
    cuts = np.linspace(0, n_steps, n_intervals + 1).round().astype(int)
    interval_z = []
    max_abs = 0.0
    for s, e in zip(cuts[:-1], cuts[1:]):
        increment = M[:, e] - M[:, s]
        state = xi[:, s, :]
        features = np.hstack([np.ones((len(state), 1)), state, state * state])
        interval_z.append(_wald_z(increment, features))
        max_abs = max(max_abs, abs(float(np.mean(increment))))
    report = ResidualReport(
        max_z=max(interval_z),
        max_abs_residual=max_abs,
        interval_z=interval_z,
        n_intervals=len(interval_z),
    )
    logger.debug(f"Martingale residual for {f.name}: max z={report.max_z:.2f}, max |mean|={max_abs:.2e}")
    return report
