import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.concat import ADJUSTED, STRICT
from core.exceptions import CompatibilityError, InvariantViolationError, UnsupportedKindError
from core.measures import (
    EmpiricalMeasure,
    Estimate,
    FiniteMeasure,
    Kernel,
    RunningMoments,
    compatible,
    concat_measure,
    conditional_kernel,
    integrate,
    mixture,
    pushforward,
    read_measure,
    restrict_kernel,
    state_conditional_kernel,
    truncate_kernel,
    truncate_measure,
    write_measure,
)
from core.pathspace import Path, PathKind, StateMap, StoppingTime, TimeGrid, truncate_at
from core.rng import tagged_generator
from core.sampling import random_finite_measure, random_path, random_stopping_time


@pytest.fixture
def grid2() -> TimeGrid:
    return TimeGrid.unit(2)


@pytest.fixture
def up_down(grid2):
    up = Path(grid2, PathKind.CADLAG_STEP, (0, 1, 1))
    down = Path(grid2, PathKind.CADLAG_STEP, (0, -1, -1))
    return up, down


class TestFiniteMeasure:
    def test_atoms_are_merged(self, up_down):
        up, down = up_down
        mu = FiniteMeasure(((up, Fraction(1, 2)), (down, Fraction(1, 4)), (up, Fraction(1, 4))))
        assert len(mu) == 2
        assert mu.mass_of(up) == Fraction(3, 4)
        assert mu.mass_of(up.with_values((0, 0, 0))) == 0

    def test_mass_must_sum_to_one(self, up_down):
        with pytest.raises(InvariantViolationError):
            FiniteMeasure(((up_down[0], Fraction(1, 2)),))
        assert FiniteMeasure(((up_down[0], Fraction(1, 2)),), normalized=False).total_mass() == Fraction(1, 2)

    def test_exact_and_float_masses_do_not_mix(self, up_down):
        up, down = up_down
        with pytest.raises(InvariantViolationError):
            FiniteMeasure(((up, Fraction(1, 2)), (down, 0.5)))

    def test_negative_mass_is_rejected(self, up_down):
        up, down = up_down
        with pytest.raises(InvariantViolationError):
            FiniteMeasure(((up, Fraction(3, 2)), (down, Fraction(-1, 2))))

    def test_mixture(self, up_down):
        up, down = up_down
        mu = mixture([(Fraction(1, 3), FiniteMeasure.point(up)), (Fraction(2, 3), FiniteMeasure.uniform([up, down]))])
        assert mu.mass_of(up) == Fraction(2, 3)
        assert mu.mass_of(down) == Fraction(1, 3)

    def test_pushforward_and_truncation(self, up_down):
        mu = FiniteMeasure.uniform(up_down)
        assert pushforward(mu, lambda omega: omega.terminal).atoms == ((-1, Fraction(1, 2)), (1, Fraction(1, 2)))
        flat = truncate_measure(mu, StoppingTime.constant(0))
        assert flat == FiniteMeasure.point(up_down[0].with_values((0, 0, 0)))

    def test_truncated_kernel(self, up_down):
        nu = Kernel(lambda omega: FiniteMeasure.uniform(up_down), name="coin")
        flat = truncate_kernel(nu, StoppingTime.constant(0))
        assert flat(up_down[1]) == FiniteMeasure.point(up_down[0].with_values((0, 0, 0)))
        assert flat.name == "coin_<=const:0"


class TestIntegrate:
    def test_exact_sum(self, up_down):
        up, down = up_down
        mu = FiniteMeasure(((up, Fraction(1, 3)), (down, Fraction(2, 3))))
        assert integrate(lambda omega: omega.terminal, mu) == Fraction(-1, 3)

    def test_plus_infinity_on_positive_mass(self, up_down):
        mu = FiniteMeasure.uniform(up_down)
        assert integrate(lambda omega: math.inf if omega.terminal > 0 else 0, mu) == math.inf

    def test_empirical_integral_is_an_estimate(self, grid2):
        xs = np.array([[0.0, 1.0, 2.0], [0.0, -1.0, 0.0], [0.0, 0.0, 4.0], [0.0, 1.0, 2.0]])
        law = EmpiricalMeasure(grid2, seed=0, arrays={"x": xs}, kinds=(("x", PathKind.CADLAG_STEP),))
        estimate = integrate(lambda m: m["x"][:, -1], law)
        assert estimate.n == 4
        assert estimate.mean == pytest.approx(2.0)
        assert estimate.stderr == pytest.approx(np.std(xs[:, -1], ddof=1) / 2)
        assert law.path(2).terminal == (4.0,)

    def test_vectorized_functional_must_return_one_value_per_path(self, grid2):
        law = EmpiricalMeasure(grid2, seed=0, arrays={"x": np.zeros((3, 3))}, kinds=(("x", PathKind.CADLAG_STEP),))
        with pytest.raises(UnsupportedKindError):
            integrate(lambda m: m["x"], law)

    def test_sample_arrays_must_agree(self, grid2):
        with pytest.raises(InvariantViolationError):
            EmpiricalMeasure(grid2, seed=0, arrays={"x": np.zeros((3, 3)), "y": np.zeros((2, 3))}, kinds=())


class TestRunningMoments:
    def test_blockwise_matches_one_pass(self):
        values = tagged_generator(3, "moments").standard_normal(1000)
        moments = RunningMoments()
        for start in range(0, 1000, 128):
            moments.add(values[start:start + 128])
        estimate = moments.estimate()
        assert estimate.mean == pytest.approx(values.mean())
        assert estimate.stderr == pytest.approx(values.std(ddof=1) / math.sqrt(1000))

    def test_from_samples(self):
        estimate = Estimate.from_samples(np.arange(10.0), block_size=3)
        assert estimate.mean == pytest.approx(4.5)
        assert estimate.stderr == pytest.approx(math.sqrt(82.5 / 9 / 10))

    def test_empty_accumulator_has_no_estimate(self):
        with pytest.raises(InvariantViolationError):
            RunningMoments().estimate()


class TestConcatMeasure:
    def test_constant_kernel_branches_every_path(self, up_down, grid2):
        mu = FiniteMeasure.uniform(up_down)
        tails = FiniteMeasure.uniform([Path(grid2, PathKind.CADLAG_STEP, (5, 6, 6)), Path(grid2, PathKind.CADLAG_STEP, (5, 4, 4))])
        joined = concat_measure(mu, StoppingTime.constant(1), Kernel.constant(tails), ADJUSTED)
        assert len(joined) == 4
        assert all(m == Fraction(1, 4) for _, m in joined)
        assert sorted(omega.terminal for omega in joined.support) == [-2, 0, 0, 2]
        assert integrate(lambda omega: omega.terminal, joined) == 0

    def test_never_keeps_the_measure(self, up_down):
        mu = FiniteMeasure.uniform(up_down)
        assert concat_measure(mu, StoppingTime.never(), Kernel.constant(mu), STRICT) == mu

    def test_incompatible_kernel(self, up_down):
        mu = FiniteMeasure.uniform(up_down)
        nu = Kernel.constant(mu)
        tau = StoppingTime.constant(1)
        assert not compatible(mu, nu, tau, STRICT)
        with pytest.raises(CompatibilityError):
            concat_measure(mu, tau, nu, STRICT)

    def test_kernel_sees_only_the_truncated_path(self, up_down):
        up, _ = up_down
        tau = StoppingTime.constant(0)
        nu = Kernel(lambda omega: FiniteMeasure.point(omega))
        restricted = restrict_kernel(nu, tau)
        assert restricted(up) == FiniteMeasure.point(truncate_at(up, tau))


class TestDisintegration:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_conditional_kernel_recovers_the_measure(self, seed):
        gen = tagged_generator(seed, "disintegration")
        pool = [random_path(gen, PathKind.CADLAG_STEP, 3) for _ in range(6)]
        mu = random_finite_measure(gen, pool)
        tau = random_stopping_time(gen, pool[0].grid)
        nu = conditional_kernel(mu, tau, ADJUSTED)
        assert concat_measure(mu, tau, nu, ADJUSTED) == mu

    def test_null_cells_use_the_fallback(self, up_down, grid2):
        up, down = up_down
        mu = FiniteMeasure.point(up)
        tau = StoppingTime.constant(1)
        nu = conditional_kernel(mu, tau, STRICT)
        assert nu(up) == FiniteMeasure.point(up.with_values((1, 1, 1)))
        assert nu(down) == FiniteMeasure.point(down.with_values((-1, -1, -1)))
        marker = FiniteMeasure.point(Path(grid2, PathKind.CADLAG_STEP, (9, 9, 9)))
        custom = conditional_kernel(mu, tau, STRICT, fallback=lambda key: marker)
        assert custom(down) == marker

    def test_state_kernel_groups_by_current_value(self, grid2):
        a = Path(grid2, PathKind.CADLAG_STEP, (0, 1, 2))
        b = Path(grid2, PathKind.CADLAG_STEP, (2, 1, 0))
        c = Path(grid2, PathKind.CADLAG_STEP, (1, 1, 1))
        mu = FiniteMeasure.uniform([a, b, c])
        nu = state_conditional_kernel(mu, StoppingTime.constant(1), StateMap.current_value(), STRICT)
        law = nu(a)
        assert law == nu(b) == nu(c)
        assert sorted(omega.values for omega in law.support) == [(1, 0, 0), (1, 1, 1), (1, 2, 2)]


class TestMeasureFiles:
    def test_exact_masses_survive_a_file(self, tmp_path, up_down):
        up, down = up_down
        mu = FiniteMeasure(((up, Fraction(1, 3)), (down, Fraction(2, 3))))
        paths_file = write_measure(mu, tmp_path / "mu.csv")
        assert paths_file.name == "mu.paths.csv"
        assert read_measure(tmp_path / "mu.csv") == mu

    def test_control_labels_survive_a_file(self, tmp_path, grid2):
        labels = ("0", "go up", "x,\r y")
        a = Path(grid2, PathKind.CONTROL_CLASS, ("0", "go up", "x,\r y"), labels=labels)
        b = Path(grid2, PathKind.CONTROL_CLASS, ("go up", "0", "0"), labels=labels)
        mu = FiniteMeasure(((a, Fraction(1, 4)), (b, Fraction(3, 4))))
        write_measure(mu, tmp_path / "controls.csv")
        assert read_measure(tmp_path / "controls.csv") == mu
