from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.exceptions import GridMismatchError, PreconditionError, StrategyError
from core.pathspace import Path, PathKind, TimeGrid
from core.schemas import FollowerConfig
from dpp.trees import TreeModel
from follower.follower import (
    BarrierStrategy,
    FollowerInstance,
    ImpulseStrategy,
    NullStrategy,
    ScriptedStrategy,
    check_bookkeeping,
    check_dpp_follower,
    check_left_integral_pathwise,
    check_strategy_non_anticipating,
    estimate_follower_value,
    left_integral,
    left_integral_characterization,
    left_integral_path,
    plus_envelope,
    simulate_follower,
)
from follower.oracle import classical_follower_value, classical_follower_values, solve_follower_dp
from follower.tree import (
    FollowerTree,
    check_correspondence_split,
    check_left_integral_support,
    default_coupling,
    follower_kernels,
)

from .strategies import integrands


@pytest.fixture
def grid3() -> TimeGrid:
    return TimeGrid.unit(3)


@pytest.fixture
def integrand(grid3):
    gamma = Path(grid3, PathKind.CADLAG_STEP, (1, 2, 3, 4))
    alpha = Path(grid3, PathKind.CAGLAD_STEP, (0, 1, 1, 3))
    return gamma, alpha


@pytest.fixture
def still() -> FollowerInstance:
    """Без шума и без текущей стоимости: G = C_T + (W_T − L_T)²"""
    return FollowerInstance(volatility=0.0, running_weight=0.0)


class TestLeftIntegral:
    def test_values(self, integrand):
        gamma, alpha = integrand
        assert [left_integral(gamma, alpha, t) for t in range(4)] == [0, 1, 1, 7]

    def test_path_is_nondecreasing(self, integrand):
        zeta = left_integral_path(*integrand)
        assert zeta.values == (0, 1, 1, 7)
        assert zeta.kind is PathKind.CAGLAD_STEP
        assert zeta.nondecreasing

    def test_plus_envelope(self, integrand):
        _, alpha = integrand
        assert plus_envelope(alpha).values == (1, 1, 3, 3)

    def test_grids_must_agree(self, integrand):
        gamma, _ = integrand
        other = Path(TimeGrid.unit(2), PathKind.CAGLAD_STEP, (0, 1, 1))
        with pytest.raises(GridMismatchError):
            left_integral(gamma, other, 1)

    def test_characterization_accepts_the_integral(self, integrand):
        gamma, alpha = integrand
        assert left_integral_characterization(left_integral_path(gamma, alpha), gamma, alpha)

    @given(integrands(), st.integers(1, 5), st.sampled_from([-1, 1]))
    @settings(max_examples=1000)
    def test_characterization_on_random_integrands(self, pair, k, sign):
        gamma, alpha = pair
        zeta = left_integral_path(gamma, alpha)
        assert left_integral_characterization(zeta, gamma, alpha)

        # скачок в одной точке шире разброса γ·Δα не укладывается ни в какие границы
        k = min(k, gamma.grid.n_steps)
        spread = (max(gamma.values) - min(gamma.values)) * (alpha.values[-1] - alpha.values[0])
        values = list(zeta.values)
        values[k] += sign * (1 + spread)
        perturbed = Path(zeta.grid, PathKind.CAGLAD_STEP, tuple(values))
        assert perturbed.values != zeta.values
        assert not left_integral_characterization(perturbed, gamma, alpha)

    def test_characterization_rejects_other_paths(self, integrand, grid3):
        gamma, alpha = integrand
        drifting = Path(grid3, PathKind.CAGLAD_STEP, (0, 1, 2, 7))
        result = left_integral_characterization(drifting, gamma, alpha)
        assert not result
        assert result.witness == (0, 1)
        shifted = Path(grid3, PathKind.CAGLAD_STEP, (1, 2, 2, 8))
        assert left_integral_characterization(shifted, gamma, alpha).witness == 0

    def test_float_tolerance(self, integrand, grid3):
        gamma, alpha = integrand
        noisy = Path(grid3, PathKind.CAGLAD_STEP, (0, 1 + 1e-12, 1, 7))
        assert not left_integral_characterization(noisy, gamma, alpha)
        assert left_integral_characterization(noisy, gamma, alpha, tolerance=1e-9)


class TestBookkeeping:
    def test_spliced_cost_is_the_spliced_integral(self, grid3):
        y = Path(grid3, PathKind.CADLAG_STEP, (0, 1, 2, 1))
        alpha = Path(grid3, PathKind.CAGLAD_STEP, (0, 1, 1, 2))
        y2 = Path(grid3, PathKind.CADLAG_STEP, (1, 0, 0, 0))
        alpha2 = Path(grid3, PathKind.CAGLAD_STEP, (0, 0, 2, 2))
        assert check_bookkeeping(default_coupling, (y, alpha), 1, (y2, alpha2))

    def test_continuous_parts_must_match(self, grid3):
        y = Path(grid3, PathKind.CADLAG_STEP, (0, 1, 2, 1))
        alpha = Path(grid3, PathKind.CAGLAD_STEP, (0, 1, 1, 2))
        with pytest.raises(PreconditionError):
            check_bookkeeping(default_coupling, (y, alpha), 1, (y.with_values((5, 5, 5, 5)), alpha))


class TestSimulation:
    def test_pushes_follow_the_left_integral(self):
        inst = FollowerInstance(fuel="decaying")
        law = simulate_follower(inst, BarrierStrategy(0.25, 0.1), 0.5, dt=1 / 16, n_paths=64, seed=2)
        assert check_left_integral_pathwise(inst, law)
        assert np.all(np.diff(law["alpha"], axis=1) >= 0)

    def test_strategies_are_non_anticipating(self):
        inst = FollowerInstance()
        strategy = BarrierStrategy(0.0, 0.1)
        law = simulate_follower(inst, strategy, 0.0, dt=1 / 16, n_paths=16, seed=4)
        assert check_strategy_non_anticipating(strategy, law)

    def test_negative_push_is_refused(self):
        with pytest.raises(StrategyError):
            simulate_follower(FollowerInstance(), ScriptedStrategy({0: -1.0}), 0.0, dt=0.25, n_paths=2, seed=0)

    def test_cheapest_strategy_without_noise(self, still):
        value = estimate_follower_value(still, [NullStrategy(), ImpulseStrategy(0.5)], 1.0, dt=0.25, n_paths=4, seed=0)
        assert value.mean == pytest.approx(0.5)
        assert value.strategy == "impulse[0]"
        assert value.per_strategy["null"] == pytest.approx(1.0)


class TestOracle:
    def test_deterministic_value(self, still):
        oracle = solve_follower_dp(still, dt=0.25, delta=0.5, h=0.05, extent=2.0, quadrature_nodes=5)
        assert oracle.v0(1.0) == pytest.approx(0.5, abs=1e-9)
        assert oracle.v0(0.0) == pytest.approx(0.0, abs=1e-9)

    def test_invalid_parameters(self, still):
        with pytest.raises(PreconditionError):
            solve_follower_dp(still, dt=0.25, delta=0.0)

    def test_dpp_at_exit(self, still):
        oracle = solve_follower_dp(still, dt=0.25, delta=0.5, h=0.05, extent=2.0, quadrature_nodes=5)
        strategies = [NullStrategy(), ImpulseStrategy(0.5), oracle.strategy()]
        report = check_dpp_follower(still, strategies, 1.0, oracle.value, dt=0.25, n_paths=4, seed=0, radius=0.5)
        assert report.lhs == pytest.approx(0.5)
        assert report.rhs == pytest.approx(0.5)
        assert report.tau == "exit:0.5"
        assert report.orientation == "inf"

    def test_classical_value_per_start(self):
        config = FollowerConfig(
            seed=0, dt=0.25, paths=64, x0="0.0, 0.5", delta=0.5, barriers="0.25",
            dp_h=0.1, dp_extent=2.0, quadrature_nodes=5,
        )
        value = classical_follower_value(config, 0.5)
        assert value.x0 == 0.5
        assert value.stderr >= 0
        assert value.strategy in {"null", "impulse[0]", "barrier[0.25]", "dp[0.5]"}
        assert [v.x0 for v in classical_follower_values(config)] == [0.0, 0.5]

    def test_dpp_rule_validation(self, still):
        with pytest.raises(PreconditionError):
            check_dpp_follower(still, [NullStrategy()], 0.0, lambda k, d: d, dt=0.25, n_paths=2, seed=0, tau="sometime")
        with pytest.raises(PreconditionError):
            check_dpp_follower(still, [NullStrategy()], 0.0, lambda k, d: d, dt=0.25, n_paths=2, seed=0)


class TestFollowerTree:
    def test_kernels(self):
        assert len(follower_kernels(2)) == 12
        assert len(follower_kernels(2, extra=(0,))) == 6

    def test_bookkeeping_laws_satisfy_the_characterization(self):
        tree = FollowerTree(depth=2)
        root = tree.root_path
        assert all(check_left_integral_support(mu) for mu in tree.P_l(root))
        assert not all(check_left_integral_support(mu) for mu in tree.P_c(root))

    def test_left_integral_filter_rejects_extra_jumps(self):
        tree = FollowerTree(depth=1)
        root = tree.root
        everything = tree.model_full.laws(root)
        kept = tree.P_l(tree.root_path)
        assert len(everything) == 12
        # e = 1 сдвигает Z без движения α
        bookkeeping = TreeModel(1, lambda node: follower_kernels(2, extra=(0,)), child=tree.child)
        assert set(kept) == set(bookkeeping.laws(root))
        assert len(tree.left_integral_kernels(root)) == 6
        rejected = [mu for mu in everything if mu not in set(kept)]
        assert len(rejected) == 6
        assert not any(check_left_integral_support(mu) for mu in rejected)

    def test_zero_coupling_keeps_z_constant(self):
        tree = FollowerTree(depth=1, coupling=lambda w: Fraction(0))
        laws = tree.P_l(tree.root_path)
        assert all(node.z == 0 for mu in laws for omega in mu.support for node in omega.values)

    def test_split(self):
        report = check_correspondence_split(depth=2)
        assert report.p_c_concatenable
        assert report.p_l_concatenable
        assert report.intersection_disintegrable
        # без исправления на нулевых ячейках условное ядро - не селектор
        assert not report.unrepaired_disintegrable
        assert "without repair" in report.detail
        assert report.dpp_equal, report.detail
        assert report.lhs == report.rhs
        assert report.n_laws["P"] <= min(report.n_laws["P_c"], report.n_laws["P_l"])

    @pytest.mark.slow
    def test_split_at_depth_three(self):
        report = check_correspondence_split(depth=3, max_measures=2, seed=1)
        assert report.p_c_concatenable
        assert report.p_l_concatenable
        assert report.intersection_disintegrable
        assert report.dpp_equal, report.detail
        assert report.lhs == report.rhs
        # p = 1/2, e = 0 и d ∈ {0, 1} в каждом из 1 + 2 + 4 узлов
        assert report.n_laws == {"P_c": 16384, "P_l": 18816, "P": 128}
