from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from core.exceptions import PreconditionError, UsageError
from core.pathspace import INFINITY, Path, PathKind, TimeGrid
from core.sampling import CONTROL_LABELS
from core.schemas import DiffusionConfig
from diffusion.generator import (
    coordinate,
    cutoff,
    generator,
    hamiltonian,
    martingale_residual,
    numeric_test_function,
    qcoord_family,
    quadratic,
)
from diffusion.sde import (
    NEVER,
    Box,
    ConstantPolicy,
    FeedbackPolicy,
    LocallyConstantPolicy,
    TauSpec,
    benchmark_sde,
    build_sde,
    builtin_objective,
    check_dpp_mc,
    check_envelopes,
    check_policy_non_anticipating,
    default_policies,
    estimate_value,
    progressive_version,
    simulate,
)


@pytest.fixture
def transport():
    """β = a, σ = 0: траектории детерминированы"""
    return build_sde(DiffusionConfig(seed=0, sigma="zero"))


@pytest.fixture
def quarter_grid() -> TimeGrid:
    return TimeGrid(Fraction(1), Fraction(1, 4))


class TestDomainAndCoefficients:
    def test_box(self):
        box = Box.interval(-2, 2)
        np.testing.assert_allclose(box.signed_distance([[0.0], [2.0], [3.0]]), [-2.0, 0.0, 1.0])
        assert box.contains([[1.9], [2.0]]).tolist() == [True, False]
        np.testing.assert_allclose(box.project([[3.0], [-5.0]]), [[2.0], [-2.0]])

    def test_envelopes(self):
        sde = benchmark_sde()
        xs = np.linspace(-2, 2, 9)
        assert check_envelopes(sde, xs)
        narrow = replace(sde, drift_bound=lambda x: np.full(len(x), 0.5))
        result = check_envelopes(narrow, xs)
        assert not result
        assert "drift" in result.detail

    def test_objectives(self):
        x = np.array([[0.0], [3.0]])
        np.testing.assert_allclose(builtin_objective("bump")(x), [1.0, np.exp(-9.0)])
        np.testing.assert_allclose(builtin_objective("identity_clip", 2.0)(x), [0.0, 2.0])
        with pytest.raises(UsageError):
            builtin_objective("sawtooth")


class TestGenerator:
    def test_quadratic_under_the_benchmark(self):
        sde = benchmark_sde()
        f = quadratic(1.0)
        x = np.array([[0.5]])
        assert generator(f, x, 1.0, sde)[0] == pytest.approx(2.0)
        assert generator(f, x, -1.0, sde)[0] == pytest.approx(0.0)
        assert hamiltonian(f, x, sde)[0] == pytest.approx(2.0)

    def test_numeric_derivatives(self):
        f = numeric_test_function(lambda x: x[:, 0] ** 3)
        x = np.array([[2.0]])
        assert f.grad(x)[0, 0] == pytest.approx(12.0, rel=1e-6)
        assert f.hess(x)[0, 0, 0] == pytest.approx(12.0, rel=1e-3)

    def test_cutoff(self):
        chi = cutoff(1.0)
        np.testing.assert_allclose(chi(np.array([[0.5], [1.5], [2.5]])), [1.0, 0.5, 0.0])
        numeric = numeric_test_function(chi.value)
        x = np.array([[1.3]])
        assert chi.grad(x)[0, 0] == pytest.approx(numeric.grad(x)[0, 0], abs=1e-6)
        with pytest.raises(PreconditionError):
            cutoff(0.0)

    def test_qcoord_family(self):
        assert [f.name for f in qcoord_family(1, 1.0)] == ["x0", "x0x0"]


class TestStoppingSpecs:
    def test_parse(self):
        tau = TauSpec.parse("ball_exit:0.5")
        assert (tau.kind, tau.param) == ("ball_exit", 0.5)
        assert str(tau) == "ball_exit:0.5"
        assert str(TauSpec.parse("horizon")) == "horizon"

    @pytest.mark.parametrize("text", ["zero:1", "hit", "exit:1"])
    def test_parse_errors(self, text):
        with pytest.raises(UsageError):
            TauSpec.parse(text)

    def test_indices(self, quarter_grid):
        xi = np.array([[0, 0.2, 0.6, 0.6, 0.6], [0, 0.1, 0.1, 0.1, 0.1]])[:, :, None]
        assert TauSpec.parse("ball_exit:0.5").indices(xi, quarter_grid).tolist() == [2, 2]
        assert TauSpec.parse("hit:0.5").indices(xi, quarter_grid).tolist() == [2, NEVER]
        assert TauSpec.parse("const:0.5").indices(xi, quarter_grid).tolist() == [2, 2]
        assert TauSpec.parse("horizon").indices(xi, quarter_grid).tolist() == [4, 4]
        assert TauSpec.parse("zero").indices(xi, quarter_grid).tolist() == [0, 0]

    def test_same_time_on_path_space(self, quarter_grid):
        tau = TauSpec.parse("hit:0.5").stopping_time()
        assert tau(Path(quarter_grid, PathKind.CONTINUOUS_PL, (0, 0.2, 0.6, 0.6, 0.6))) == Fraction(1, 2)
        assert tau(Path(quarter_grid, PathKind.CONTINUOUS_PL, (0, 0.1, 0.1, 0.1, 0.1))) is INFINITY


class TestPolicies:
    def test_feedback(self):
        sde = benchmark_sde()
        x = np.array([[-1.0], [1.0], [0.05]])
        assert FeedbackPolicy(sde).choose(0.0, x, {}).tolist() == [2, 0, 0]
        assert FeedbackPolicy(sde, dead_zone=0.1).choose(0.0, x, {}).tolist() == [2, 0, 1]

    def test_default_class(self):
        policies = default_policies(benchmark_sde())
        assert len(policies) == 8
        assert policies[0].name == "const[0]"

    def test_recorded_controls_are_non_anticipating(self):
        sde = benchmark_sde()
        policy = LocallyConstantPolicy(2, 0.5, FeedbackPolicy(sde))
        law = simulate(sde, policy, [0.0], dt=1 / 16, n_paths=20, seed=3)
        assert check_policy_non_anticipating(policy, law)


class TestSimulation:
    def test_absorption_at_the_boundary(self, transport):
        law = simulate(transport, ConstantPolicy(2), [1.5], dt=0.25, n_paths=2, seed=1)
        np.testing.assert_allclose(law["xi"][:, :, 0], [[1.5, 1.75, 2.0, 2.0, 2.0]] * 2)
        assert law["absorbed"][0].tolist() == [False, False, True, True, True]
        assert law["alpha"][0].tolist() == [2] * 5

    def test_start_outside_the_domain(self, transport):
        with pytest.raises(PreconditionError):
            simulate(transport, ConstantPolicy(0), [3.0], dt=0.25, n_paths=2, seed=1)

    def test_same_seed_same_paths(self):
        sde = benchmark_sde()
        a = simulate(sde, ConstantPolicy(1), [0.0], dt=1 / 16, n_paths=50, seed=7)
        b = simulate(sde, ConstantPolicy(1), [0.0], dt=1 / 16, n_paths=50, seed=7)
        c = simulate(sde, ConstantPolicy(1), [0.0], dt=1 / 16, n_paths=50, seed=8)
        assert np.array_equal(a["xi"], b["xi"])
        assert not np.array_equal(a["xi"], c["xi"])

    def test_martingale_residuals(self):
        sde = build_sde(DiffusionConfig(seed=0, domain_low=-10, domain_high=10))
        law = simulate(sde, ConstantPolicy(1), [0.0], dt=1 / 64, n_paths=2000, seed=5)
        f = coordinate(0, 1)
        assert martingale_residual(sde, law, f).max_z < 4.5
        assert martingale_residual(sde, law, quadratic(1.0)).max_z < 4.5
        wrong = build_sde(DiffusionConfig(seed=0, beta="constant", beta_scale=3.0, domain_low=-10, domain_high=10))
        assert martingale_residual(sde, law, f, generator_sde=wrong).max_z > 5


class TestValueAndDpp:
    def exact(self, t, x):
        return np.minimum(x[:, 0] + 1.0 - t, 2.0)

    def test_best_policy_pushes_up(self, transport):
        objective = builtin_objective("identity_clip", 2.0)
        estimate = estimate_value(transport, default_policies(transport), objective, [0.0], dt=0.25, n_paths=4, seed=0)
        assert estimate.value == pytest.approx(1.0)
        assert estimate.stderr == pytest.approx(0.0, abs=1e-12)
        assert estimate.policy == "const[2]"
        assert estimate.per_policy["const[0]"] == pytest.approx(-1.0)

    @pytest.mark.parametrize("tau", ["const:0.5", "zero", "horizon", "ball_exit:0.5"])
    def test_dpp_with_the_exact_value(self, transport, tau):
        objective = builtin_objective("identity_clip", 2.0)
        report = check_dpp_mc(
            transport, default_policies(transport), objective, [0.0], TauSpec.parse(tau),
            self.exact, dt=0.25, n_paths=4, seed=0,
        )
        assert report.lhs == pytest.approx(1.0)
        assert report.rhs == pytest.approx(1.0)
        assert report.z == pytest.approx(0.0)
        assert report.tau == tau


class TestProgressiveVersion:
    def test_window_average(self):
        alpha = Path(TimeGrid.unit(4), PathKind.CONTROL_CLASS, ("up", "up", "down", "down", "down"), labels=CONTROL_LABELS)
        smoothed = progressive_version(alpha, Fraction(1, 2))
        assert smoothed.kind is PathKind.CAGLAD_STEP
        assert smoothed.values == ("up", "up", "up", "up", "down")

    def test_preconditions(self, staircase):
        with pytest.raises(PreconditionError):
            progressive_version(staircase, 1)
        alpha = Path(TimeGrid.unit(1), PathKind.CONTROL_CLASS, ("up", "up"), labels=CONTROL_LABELS)
        with pytest.raises(PreconditionError):
            progressive_version(alpha, 0)
