"""
DP-оракул классической задачи монотонного преследования

Состояние - отклонение d = W − L на равномерной сетке [−extent, extent];
толчки кратны δ; ожидание по шуму берётся квадратурой Гаусса-Эрмита.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from core.exceptions import PreconditionError
from core.schemas import FollowerConfig, FollowerValue

from .follower import (
    FollowerInstance,
    Strategy,
    TableStrategy,
    default_strategies,
    estimate_follower_value,
    make_grid,
)

logger = logging.getLogger(__name__)


@dataclass
class DPOracle:
    """V_k(d) и оптимальные толчки на сетке (t_k, d_j)"""
    d_grid: np.ndarray
    times: np.ndarray
    values: np.ndarray
    pushes: np.ndarray
    delta: float

    def value(self, k: int, d) -> np.ndarray:
        """Линейная интерполяция V_k; вне сетки - крайние значения"""
        return np.interp(np.asarray(d, dtype=float), self.d_grid, self.values[k])

    def v0(self, x0: float) -> float:
        return float(self.value(0, np.array([x0]))[0])

    def strategy(self) -> TableStrategy:
        return TableStrategy(self.d_grid, self.pushes, name=f"dp[{self.delta:g}]")


def _quadrature(n: int):
    # вероятностные узлы Эрмита: веса нормируются на плотность N(0, 1)
    nodes, weights = hermegauss(n)
    return nodes, weights / math.sqrt(2 * math.pi)


def solve_follower_dp(
    inst: FollowerInstance,
    dt: float,
    delta: float,
    h: float = 0.025,
    extent: float = 4.0,
    quadrature_nodes: int = 9,
) -> DPOracle:
    """
    V_K(d) = g(d),
    V_k(d) = min_m [f(t_k)·mδ + h(d − mδ)Δt + E V_{k+1}(d − mδ + μΔt + s√Δt·Z)].
    """
    if delta <= 0 or h <= 0 or extent <= 0:
        raise PreconditionError("Push size, grid step and extent must be positive")
    grid = make_grid(inst.horizon, dt)
    cells = int(round(2 * extent / h))
    if cells < 2:
        raise PreconditionError(f"Grid step {h} leaves fewer than two cells on [-{extent}, {extent}]")
    d = np.linspace(-extent, extent, cells + 1)
    times = grid.as_floats()
    n_steps = grid.n_steps
    nodes, weights = _quadrature(quadrature_nodes)
    shifts = delta * np.arange(int(math.ceil(2 * extent / delta)) + 1)
    moves = inst.drift * dt + inst.volatility * math.sqrt(dt) * nodes

    values = np.zeros((n_steps + 1, len(d)))
    pushes = np.zeros((n_steps, len(d)))
    values[-1] = inst.g(d)
    for k in range(n_steps - 1, -1, -1):
        t = float(times[k])
        nxt = values[k + 1]
        # продолжение после толчка: C(e) = h(e)Δt + E V_{k+1}(e + шум)
        expected = np.interp(d[:, None] + moves[None, :], d, nxt) @ weights
        continuation = inst.h(t, d) * dt + expected
        post = d[None, :] - shifts[:, None]
        candidates = float(inst.f(t)) * shifts[:, None] + np.interp(post, d, continuation)
        best = candidates.argmin(axis=0)
        values[k] = candidates[best, np.arange(len(d))]
        pushes[k] = shifts[best]
    logger.info(
        f"Follower DP: {len(d)} states, {n_steps} steps, {len(shifts)} push sizes, "
        f"{quadrature_nodes} quadrature nodes"
    )
    return DPOracle(d, times, values, pushes, delta)


def oracle_from_config(config: FollowerConfig, delta: Optional[float] = None) -> DPOracle:
    return solve_follower_dp(
        FollowerInstance.from_config(config),
        dt=config.dt,
        delta=config.delta if delta is None else delta,
        h=config.dp_h,
        extent=config.dp_extent,
        quadrature_nodes=config.quadrature_nodes,
    )


def classical_follower_value(
    config: FollowerConfig,
    x0: float,
    oracle: Optional[DPOracle] = None,
    refined: Optional[DPOracle] = None,
) -> FollowerValue:
    """
    MC-минимум по барьерным стратегиям и DP-политике против DP-значения
    в точке x0; delta_bias = v(δ) − v(δ/2).
    """
    inst = FollowerInstance.from_config(config)
    oracle = oracle or oracle_from_config(config)
    refined = refined or oracle_from_config(config, delta=config.delta / 2)
    strategies: List[Strategy] = default_strategies(config) + [oracle.strategy()]
    estimate = estimate_follower_value(inst, strategies, x0, config.dt, config.paths, config.seed)
    v_dp = oracle.v0(x0)
    logger.info(f"Follower value at x0={x0:g}: mc={estimate.mean:.5f}±{estimate.stderr:.5f} dp={v_dp:.5f}")
    return FollowerValue(
        x0=x0,
        v_mc=estimate.mean,
        stderr=estimate.stderr,
        v_dp=v_dp,
        delta_bias=v_dp - refined.v0(x0),
        strategy=estimate.strategy,
    )


def classical_follower_values(config: FollowerConfig, oracle: Optional[DPOracle] = None) -> List[FollowerValue]:
    oracle = oracle or oracle_from_config(config)
    refined = oracle_from_config(config, delta=config.delta / 2)
    return [classical_follower_value(config, x0, oracle, refined) for x0 in config.x0]
