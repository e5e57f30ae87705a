from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.exceptions import GridMismatchError, InfinityArithmeticError, UnsupportedKindError
from core.pathspace import (
    INFINITY,
    Path,
    PathKind,
    PathMeasure,
    StateMap,
    StoppingTime,
    TimeGrid,
    absorbed_in,
    as_fraction,
    finite_variation,
    is_F_tau_measurable,
    is_non_anticipating,
    is_stopping_time,
    lipschitz,
    make_path,
    measure_path_truncate,
    nondecreasing,
    nonincreasing,
    path_from_csv,
    path_to_csv,
    product,
    read_path,
    starts_in,
    subspace_check,
    time_max,
    time_min,
    total_variation,
    truncate,
    truncate_at,
    truncate_predictable,
    write_path,
)
from core.sampling import CONTROL_LABELS

from .strategies import control_paths, grid_times, numeric_kinds, numeric_stopping_times, paths


class TestTimeGrid:
    def test_unit_grid_points(self, grid4):
        assert grid4.points == tuple(Fraction(k) for k in range(5))
        assert grid4.n_steps == 4
        assert grid4.size == 5

    def test_fractional_step(self, half_grid):
        assert half_grid.n_steps == 4
        assert half_grid.index(Fraction(3, 4)) == 3
        assert half_grid.floor_index(Fraction(5, 8)) == 2

    def test_off_grid_time_is_rejected(self, grid4):
        with pytest.raises(GridMismatchError):
            grid4.index(Fraction(1, 2))
        with pytest.raises(GridMismatchError):
            grid4.index(5)

    def test_horizon_must_be_a_multiple_of_step(self):
        with pytest.raises(GridMismatchError):
            TimeGrid(Fraction(1), Fraction(2, 3))

    def test_infinity_floors_to_last_index(self, grid4):
        assert grid4.floor_index(INFINITY) == 4
        assert not grid4.contains(INFINITY)


class TestInfinity:
    def test_ordering(self):
        assert INFINITY > Fraction(10 ** 6)
        assert not INFINITY < 3
        assert INFINITY <= INFINITY
        assert time_min(INFINITY, Fraction(2)) == 2
        assert time_max(INFINITY, Fraction(2)) is INFINITY

    def test_arithmetic_is_refused(self):
        with pytest.raises(InfinityArithmeticError):
            INFINITY + 1
        with pytest.raises(InfinityArithmeticError):
            1 - INFINITY
        with pytest.raises(InfinityArithmeticError):
            as_fraction(INFINITY)

    def test_float_times_become_fractions(self):
        assert as_fraction(0.25) == Fraction(1, 4)


class TestPath:
    def test_value_count_must_match_grid(self, grid4):
        with pytest.raises(GridMismatchError):
            Path(grid4, PathKind.CADLAG_STEP, (0, 1))

    def test_nondecreasing_flag_is_validated(self, grid4):
        with pytest.raises(UnsupportedKindError):
            Path(grid4, PathKind.CAGLAD_STEP, (0, 1, 0, 1, 2), nondecreasing=True)
        with pytest.raises(UnsupportedKindError):
            Path(grid4, PathKind.CADLAG_STEP, (0, 1, 2, 3, 4), nondecreasing=True)

    def test_control_values_must_be_labels(self, grid4):
        with pytest.raises(UnsupportedKindError):
            Path(grid4, PathKind.CONTROL_CLASS, ("up",) * 4 + ("sideways",), labels=CONTROL_LABELS)

    def test_values_between_grid_points(self):
        pl = make_path((0, 2), PathKind.CONTINUOUS_PL)
        assert pl.at(Fraction(1, 2)) == 1
        caglad = make_path((0, 2), PathKind.CAGLAD_STEP)
        assert caglad.at(Fraction(1, 2)) == 2
        cadlag = make_path((0, 2), PathKind.CADLAG_STEP)
        assert cadlag.at(Fraction(1, 2)) == 0

    def test_product_components_share_grid(self, staircase):
        other = make_path((0, 1), PathKind.CADLAG_STEP)
        with pytest.raises(GridMismatchError):
            product(staircase, other)
        pair = product(staircase, staircase)
        assert pair.terminal == (3, 3)


class TestTruncate:
    def test_freezes_after_t(self, staircase):
        assert truncate(staircase, 2).values == (0, 1, 2, 2, 2)

    def test_infinity_is_identity(self, staircase):
        assert truncate(staircase, INFINITY) is staircase

    def test_control_future_becomes_neutral(self, grid4):
        omega = Path(grid4, PathKind.CONTROL_CLASS, ("up", "down", "up", "idle", "up"), labels=CONTROL_LABELS)
        assert omega.neutral == "idle"
        assert truncate(omega, 2).values == ("up", "down", "idle", "idle", "idle")

    def test_predictable_truncation_uses_left_limit(self, staircase):
        assert truncate_predictable(staircase, 2).values == (0, 1, 1, 1, 1)
        assert truncate_predictable(staircase, 0).values == (0, 0, 0, 0, 0)

    @given(st.data())
    def test_projection_law(self, data):
        omega = data.draw(paths())
        s = data.draw(grid_times(omega.grid, allow_infinity=True))
        t = data.draw(grid_times(omega.grid, allow_infinity=True))
        assert truncate(truncate(omega, s), t) == truncate(omega, time_min(s, t))

    def test_measure_path_keeps_atoms_up_to_t(self, grid4):
        mu = PathMeasure(grid4, ((Fraction(1), "up", Fraction(1, 2)), (Fraction(5, 2), "down", Fraction(1, 4))))
        assert mu.total_mass() == Fraction(3, 4)
        assert mu.total_mass(before=2) == Fraction(1, 2)
        assert measure_path_truncate(mu, 2).atoms == ((Fraction(1), "up", Fraction(1, 2)),)


class TestStoppingTime:
    def test_hitting_and_ball_exit(self, staircase):
        assert StoppingTime.hitting(2)(staircase) == 2
        assert StoppingTime.hitting(5)(staircase) is INFINITY
        assert StoppingTime.hitting(0, above=False)(staircase) == 0
        assert StoppingTime.ball_exit(0, 2, cap=4)(staircase) == 2
        assert StoppingTime.ball_exit(0, 5, cap=3)(staircase) == 3

    def test_minimum_and_maximum(self, staircase):
        tau = StoppingTime.hitting(2).minimum(StoppingTime.constant(Fraction(1)))
        assert tau(staircase) == 1
        assert StoppingTime.never().maximum(StoppingTime.constant(0))(staircase) is INFINITY

    def test_anticipating_rule_fails_galmarino(self):
        grid = TimeGrid.unit(2)
        omega = Path(grid, PathKind.CADLAG_STEP, (0, 0, 1))

        def peek(path):
            return 0 if path.terminal > 0 else INFINITY

        result = is_stopping_time(peek, grid, [omega])
        assert not result
        assert result.witness == (omega, 0)

    @settings(max_examples=200)
    @given(st.data())
    def test_builtin_times_are_stopping_times(self, data):
        omega = data.draw(paths(kind=data.draw(numeric_kinds)))
        tau = data.draw(numeric_stopping_times(omega.grid))
        assert is_stopping_time(tau, omega.grid, [omega])
        assert tau(truncate_at(omega, tau)) == tau(omega)

    @given(st.data())
    def test_truncations_compose_to_the_minimum(self, data):
        omega = data.draw(paths(kind=data.draw(numeric_kinds)))
        tau = data.draw(numeric_stopping_times(omega.grid))
        kappa = data.draw(numeric_stopping_times(omega.grid))
        assert truncate_at(truncate_at(omega, kappa), tau) == truncate_at(omega, tau.minimum(kappa))


class TestMeasurability:
    def test_value_before_tau_is_F_tau_measurable(self, staircase):
        def value_at_one(path):
            return path.value_at(1)

        assert is_F_tau_measurable(value_at_one, StoppingTime.constant(2), [staircase])
        assert not is_F_tau_measurable(value_at_one, StoppingTime.constant(0), [staircase])

    def test_running_maximum_is_non_anticipating(self, staircase):
        def running_max(path):
            out, best = [], path.head
            for v in path.values:
                best = max(best, v)
                out.append(best)
            return path.with_values(out)

        def reverse(path):
            return path.with_values(path.values[::-1])

        assert is_non_anticipating(running_max, [staircase])
        assert not is_non_anticipating(reverse, [staircase])

    def test_state_process(self, staircase):
        X = StateMap.current_value()
        assert [X.at(staircase, t) for t in staircase.grid.points] == list(staircase.values)


class TestSubspaces:
    def test_start_set(self, staircase):
        assert starts_in({0, 1})(staircase)
        assert not starts_in(lambda v: v > 0)(staircase)

    def test_absorbed(self, staircase):
        absorbed = absorbed_in(lambda v: v >= 2)
        assert not absorbed(staircase)
        assert absorbed(truncate(staircase, 2))

    def test_lipschitz(self, staircase):
        assert not lipschitz(1)(staircase)
        assert lipschitz(2)(staircase)
        assert not lipschitz(2, x0=1)(staircase)

    def test_monotone_subspaces(self, grid4, staircase):
        falling = Path(grid4, PathKind.CADLAG_STEP, (3, 2, 2, 0, -1))
        assert nonincreasing()(falling)
        assert not nonincreasing()(staircase)
        assert not nondecreasing()(falling)
        assert subspace_check(falling, nonincreasing(), stable=True)

    def test_every_grid_path_has_finite_variation(self, staircase):
        # конечная сетка: вариация ограничена суммой |приращений|
        assert finite_variation()(staircase)
        assert total_variation(staircase) == 5
        assert finite_variation(5)(staircase)
        assert not finite_variation(4)(staircase)
        assert subspace_check(staircase, finite_variation(5), stable=True)

    def test_stable_check_covers_truncations(self, grid4):
        rising = Path(grid4, PathKind.CAGLAD_STEP, (0, 1, 1, 2, 4), nondecreasing=True)
        assert subspace_check(rising, nondecreasing(), stable=True)


class TestCsv:
    def test_exact_values_survive_a_file(self, tmp_path, half_grid):
        omega = Path(half_grid, PathKind.CADLAG_STEP, (0, Fraction(1, 3), 2, Fraction(-5, 2), 1))
        write_path(omega, tmp_path / "omega.csv")
        assert read_path(tmp_path / "omega.csv") == omega

    def test_control_labels_survive_a_file(self, tmp_path, grid4):
        omega = Path(grid4, PathKind.CONTROL_CLASS, ("up", "idle", "down", "up", "idle"), labels=CONTROL_LABELS)
        write_path(omega, tmp_path / "control.csv")
        assert read_path(tmp_path / "control.csv") == omega

    def test_digit_labels_stay_strings(self, grid4):
        omega = Path(grid4, PathKind.CONTROL_CLASS, ("0", "1", "0", "0", "1"), labels=("0", "1"))
        back = path_from_csv(path_to_csv(omega))
        assert back == omega
        assert all(isinstance(v, str) for v in back.values + back.labels)

    def test_labels_with_separators_survive_a_file(self, tmp_path, grid4):
        labels = ("idle", "go up", "a|b", "x, y")
        omega = Path(grid4, PathKind.CONTROL_CLASS, ("go up", "a|b", "x, y", "idle", "go up"), labels=labels)
        write_path(omega, tmp_path / "labels.csv")
        assert read_path(tmp_path / "labels.csv") == omega

    def test_labels_must_differ_as_text(self, grid4):
        omega = Path(grid4, PathKind.CONTROL_CLASS, (1,) * 5, labels=(1, "1"))
        with pytest.raises(UnsupportedKindError):
            path_to_csv(omega)

    @given(control_paths())
    @settings(max_examples=300)
    def test_control_paths_round_trip_exactly(self, omega):
        back = path_from_csv(path_to_csv(omega))
        assert back == omega
        assert [type(v) for v in back.values] == [type(v) for v in omega.values]
        assert [type(v) for v in back.labels] == [type(v) for v in omega.labels]
