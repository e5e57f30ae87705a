from fractions import Fraction

import pytest

from core.concat import STRICT
from core.exceptions import EnumerationLimitError, InvariantViolationError, PreconditionError
from core.measures import integrate
from core.pathspace import StoppingTime
from dpp.control import (
    ControlCorrespondence,
    check_concatenable,
    check_disintegrable,
    check_factoring,
    combine,
    eps_selector,
    selector_family,
    value,
    verify_dpp,
)
from dpp.trees import (
    INSTANCE_KINDS,
    TreeInstance,
    TreeModel,
    estimate_law_count,
    generate_instance,
    lattice_kernels,
    node_state,
    root_node,
    support_paths,
    tree_correspondence,
    tree_stopping_times,
    walk_child,
)

FAIR = ((-1, Fraction(1, 2)), (1, Fraction(1, 2)))
UPWARD = ((-1, Fraction(1, 4)), (1, Fraction(3, 4)))


def position(omega):
    return omega.terminal.position


@pytest.fixture
def coin_model() -> TreeModel:
    """Один шаг: честная или смещённая вверх монета"""
    return TreeModel(1, lambda node: (FAIR, UPWARD))


@pytest.fixture
def coin(coin_model):
    P = tree_correspondence(lambda node: coin_model, name="coin")
    return P, coin_model.node_path(root_node())


class TestTreeModel:
    def test_lattice_kernels(self):
        assert len(lattice_kernels((-1, 1), 2)) == 3
        assert len(lattice_kernels((-1, 0, 1), 2)) == 6
        assert all(sum(p for _, p in k) == 1 for k in lattice_kernels((-1, 0, 1), 4))

    def test_one_law_per_kernel(self, coin_model):
        laws = coin_model.laws(root_node())
        assert len(laws) == 2
        assert coin_model.count_laws(root_node()) == 2
        assert sorted(integrate(position, mu) for mu in laws) == [0, Fraction(1, 2)]

    def test_paths_freeze_at_depth(self, coin_model):
        root = root_node()
        child = walk_child(root, 1)
        assert coin_model.to_path((root, child)).values == (root, child)
        assert coin_model.node_path(child).values == (child, child)

    def test_zero_probability_children_are_not_expanded(self):
        model = TreeModel(2, lambda node: (((-1, Fraction(0)), (1, Fraction(1))),))
        (law,) = model.laws(root_node())
        assert len(law) == 1
        assert position(law.support[0]) == 2

    def test_enumeration_limit(self):
        kernels = lattice_kernels((-1, 1), 4)
        model = TreeModel(3, lambda node: kernels, max_laws=10)
        with pytest.raises(EnumerationLimitError):
            model.laws(root_node())

    def test_backward_induction(self, coin_model):
        root = root_node()
        assert coin_model.oracle(lambda node: node.position, root) == Fraction(1, 2)
        assert coin_model.oracle(lambda node: node.position, root, orientation="inf") == 0

    def test_support_paths_include_truncations(self, coin_model):
        paths = support_paths(coin_model.laws(root_node()))
        assert coin_model.node_path(root_node()) in paths
        assert len(paths) == 3

    def test_estimate_law_count(self):
        assert estimate_law_count(2, 2, 3) == 27
        assert estimate_law_count(1, 3, 4) == 4


class TestCorrespondences:
    def test_value_is_the_best_law(self, coin):
        P, root = coin
        assert value(P, position, root) == Fraction(1, 2)

    def test_empty_correspondence_is_rejected(self, coin):
        _, root = coin
        empty = ControlCorrespondence(lambda omega: (), name="empty")
        with pytest.raises(InvariantViolationError):
            empty(root)

    def test_combine(self, coin, coin_model):
        P, root = coin
        fair_model = TreeModel(1, lambda node: (FAIR,))
        fair = tree_correspondence(lambda node: fair_model, name="fair")
        both = combine([P, fair], mode="intersection")
        assert both(root) == fair(root)
        assert set(combine([P, fair], mode="union")(root)) == set(P(root))
        up_model = TreeModel(1, lambda node: (UPWARD,))
        up = tree_correspondence(lambda node: up_model, name="up")
        with pytest.raises(InvariantViolationError):
            combine([fair, up])(root)
        with pytest.raises(PreconditionError):
            combine([P], mode="xor")

    def test_properties_of_combinations(self):
        """Пересечение и объединение замкнутых моделей глубины 2"""
        full = TreeModel(2, lambda node: (FAIR, UPWARD))
        fair_model = TreeModel(2, lambda node: (FAIR,))
        up_model = TreeModel(2, lambda node: (UPWARD,))
        closed = tree_correspondence(lambda node: full, name="closed")
        fair = tree_correspondence(lambda node: fair_model, name="fair")
        up = tree_correspondence(lambda node: up_model, name="up")
        root = full.node_path(root_node())
        sample = [root] + support_paths(full.laws(root_node()))
        taus = tree_stopping_times(2, (-1, 1))

        for P in (closed, fair, up, combine([closed, fair]), combine([closed, fair], mode="union")):
            assert check_concatenable(P, STRICT, taus, sample), P.name
            assert check_disintegrable(P, STRICT, taus, sample), P.name

        # каждая часть склеиваема, объединение - нет: "честно, затем вверх" не входит в P(ω)
        mixed = combine([fair, up], mode="union")
        assert len(mixed(root)) == 2
        result = check_concatenable(mixed, STRICT, taus, sample)
        assert not result
        assert "leaves P(omega)" in result.detail
        assert check_disintegrable(mixed, STRICT, taus, sample)

    def test_selectors(self, coin):
        P, root = coin
        best = eps_selector(P, position)
        assert integrate(position, best(root)) == Fraction(1, 2)
        loose = eps_selector(P, position, eps=1)
        assert loose(root) is P(root)[0]
        names = [s.name for s in selector_family(P, position, seed=3)]
        assert names == ["first", "last", "eps_argmax[0]", "random[3]"]

    def test_value_factors_through_the_node(self, coin, coin_model):
        P, root = coin
        sample = support_paths(coin_model.laws(root_node()))
        assert check_factoring(P, position, node_state(), sample)


class TestVerifyDpp:
    def test_both_sides_on_the_coin(self, coin):
        P, root = coin
        for tau in tree_stopping_times(1, (-1, 0, 1)):
            report = verify_dpp(P, position, tau, root)
            assert report.lhs == report.rhs == Fraction(1, 2)
            assert report.equal

    def test_infimum_orientation(self, coin):
        P, root = coin
        report = verify_dpp(P, position, StoppingTime.never(), root, orientation="inf")
        assert report.lhs == 0
        assert report.orientation == "inf"

    def test_non_tail_reward_is_rejected(self, coin, coin_model):
        P, root = coin
        omega = coin_model.laws(root_node())[0].support[0]
        triples = [(omega, 1, coin_model.node_path(omega.terminal))]

        def start(path):
            return path.head.position

        with pytest.raises(PreconditionError):
            verify_dpp(P, start, StoppingTime.constant(0), root, c=STRICT, tail_triples=triples)

    def test_unknown_orientation(self, coin):
        P, root = coin
        with pytest.raises(PreconditionError):
            verify_dpp(P, position, StoppingTime.never(), root, orientation="max")


class TestInstances:
    def test_generation_is_deterministic(self):
        a = generate_instance(5, 0, depth=2, n_kernels=2)
        b = generate_instance(5, 0, depth=2, n_kernels=2)
        assert a.all_kernels == b.all_kernels
        assert a.payoff == b.payoff
        assert a.instance_id == "closed-5-0"

    def test_unknown_kind(self):
        with pytest.raises(PreconditionError):
            generate_instance(5, 0, depth=2, kind="open")

    @pytest.mark.parametrize("index", range(3))
    def test_closed_instance_satisfies_the_dpp(self, index):
        inst = generate_instance(11, index, depth=2, n_kernels=2, kind="closed")
        P = inst.correspondence()
        taus = inst.stopping_times()
        sample = inst.sample()
        assert check_concatenable(P, STRICT, taus, sample, max_measures=4)
        assert check_disintegrable(P, STRICT, taus, sample, max_measures=4)
        for tau in taus:
            report = verify_dpp(P, inst.G, tau, inst.root_path)
            assert report.equal, tau.name
            assert report.lhs == inst.oracle()

    @pytest.mark.parametrize("index", range(3))
    def test_one_sided_instances(self, index):
        concat_only = generate_instance(11, index, depth=2, n_kernels=3, kind="concat_only")
        disint_only = generate_instance(11, index, depth=2, n_kernels=3, kind="disint_only")
        for tau in concat_only.stopping_times():
            assert verify_dpp(concat_only.correspondence(), concat_only.G, tau, concat_only.root_path).geq
        for tau in disint_only.stopping_times():
            assert verify_dpp(disint_only.correspondence(), disint_only.G, tau, disint_only.root_path).leq

    @pytest.mark.parametrize("kind, lhs, rhs", [("concat_only", 10, 5), ("disint_only", 0, 5)])
    def test_strict_gap_on_the_opposite_side(self, kind, lhs, rhs):
        """Ядро 0 ведёт вниз, ядро 1 вверх; выигрыш 10 только после двух шагов вверх"""
        inst = TreeInstance(
            instance_id=f"gap-{kind}",
            kind=kind,
            depth=2,
            moves=(-1, 1),
            all_kernels=(((-1, Fraction(1)), (1, Fraction(0))), ((-1, Fraction(0)), (1, Fraction(1)))),
            payoff={-2: 0, -1: 0, 0: 5, 1: 0, 2: 10},
        )
        report = verify_dpp(inst.correspondence(), inst.G, StoppingTime.constant(1), inst.root_path)
        assert (report.lhs, report.rhs) == (lhs, rhs)
        if kind == "concat_only":
            assert report.geq and not report.leq
        else:
            assert report.leq and not report.geq

    def test_kinds(self):
        assert INSTANCE_KINDS == ("closed", "concat_only", "disint_only")
