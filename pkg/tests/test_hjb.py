import numpy as np
import pytest

from core.exceptions import CFLError, PreconditionError
from core.schemas import DiffusionConfig
from diffusion.hjb import cfl_limit, hjb_solve, hjb_solve_implicit, viscosity_check
from diffusion.sde import benchmark_sde, build_sde, builtin_objective


@pytest.fixture(scope="module")
def benchmark_grid():
    return hjb_solve(benchmark_sde(), builtin_objective("bump"), 0.1, dt=0.005)


class TestExplicitScheme:
    def test_cfl_limit(self):
        assert cfl_limit(benchmark_sde(), 0.1) == pytest.approx(0.01 / 1.1)

    def test_unstable_step_is_refused(self):
        with pytest.raises(CFLError) as info:
            hjb_solve(benchmark_sde(), builtin_objective("bump"), 0.1, dt=0.05)
        assert info.value.required_dt == pytest.approx(0.01 / 1.1)

    def test_step_must_divide_the_horizon(self):
        with pytest.raises(PreconditionError):
            hjb_solve(benchmark_sde(), builtin_objective("bump"), 0.1, dt=0.003)

    def test_default_step_is_stable(self):
        sde = benchmark_sde()
        grid = hjb_solve(sde, builtin_objective("bump"), 0.1)
        assert grid.dt <= cfl_limit(sde, grid.h) * (1 + 1e-9)
        assert grid.scheme == "explicit"

    def test_pure_transport_is_an_exact_shift(self):
        sde = build_sde(DiffusionConfig(seed=0, sigma="zero"))
        grid = hjb_solve(sde, builtin_objective("identity_clip", 2.0), 0.1, dt=0.1)
        x = grid.x[1:-1]
        np.testing.assert_allclose(grid.values[0, 1:-1], np.minimum(x + 1.0, 2.0), atol=1e-9)

    def test_boundary_keeps_the_objective(self, benchmark_grid):
        g = np.exp(-4.0)
        np.testing.assert_allclose(benchmark_grid.values[:, 0], g)
        np.testing.assert_allclose(benchmark_grid.values[:, -1], g)

    def test_interpolation(self, benchmark_grid):
        assert benchmark_grid(0.0, [benchmark_grid.x[5]])[0] == pytest.approx(benchmark_grid.values[0, 5])
        assert benchmark_grid(0.0, [10.0])[0] == pytest.approx(benchmark_grid.values[0, -1])

    def test_one_dimensional_bounded_domain_only(self):
        sde = build_sde(DiffusionConfig(seed=0, domain_low=float("-inf")))
        with pytest.raises(PreconditionError):
            hjb_solve(sde, builtin_objective("bump"), 0.1)


class TestImplicitScheme:
    def test_agrees_with_the_explicit_scheme(self, benchmark_grid):
        implicit = hjb_solve_implicit(benchmark_sde(), builtin_objective("bump"), 0.1, dt=0.005)
        assert implicit.scheme == "implicit"
        assert np.max(np.abs(implicit.values[0] - benchmark_grid.values[0])) < 0.02

    def test_large_steps_are_allowed(self):
        implicit = hjb_solve_implicit(benchmark_sde(), builtin_objective("bump"), 0.1, dt=0.05)
        assert np.all(np.isfinite(implicit.values))


class TestViscosity:
    def test_smooth_interior_node(self, benchmark_grid):
        report = viscosity_check(benchmark_grid, (0, 20), 3, benchmark_sde())
        assert report.supersolution and report.subsolution
        assert report.x == pytest.approx(0.0, abs=1e-12)

    def test_spike_breaks_the_subsolution_test(self, benchmark_grid):
        values = benchmark_grid.values.copy()
        values[0, 20] += 1.0
        report = viscosity_check(benchmark_grid.with_values(values), (0, 20), 3, benchmark_sde())
        assert not report.subsolution
        assert report.supersolution

    @pytest.mark.parametrize("node, r", [((0, 0), 3), ((0, 20), 2)])
    def test_preconditions(self, benchmark_grid, node, r):
        with pytest.raises(PreconditionError):
            viscosity_check(benchmark_grid, node, r, benchmark_sde())

    def test_terminal_row_is_not_tested(self, benchmark_grid):
        last = benchmark_grid.values.shape[0] - 1
        with pytest.raises(PreconditionError):
            viscosity_check(benchmark_grid, (last, 20), 3, benchmark_sde())
