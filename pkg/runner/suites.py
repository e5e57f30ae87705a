"""
Наборы проверок: законы ядра, конечные и мартингальные DPP, диффузия, преследование
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.concat import (
    ADJUSTED,
    CONTROL_SPLICE,
    MEASURE_SPLICE,
    MEASURE_SPLICE_RENORMALIZED,
    STRICT,
    compose_shifted_stopping_time,
    concat,
    shift,
    shift_at,
    split_stopping_time,
)
from core.measures import Kernel, concat_measure, conditional_kernel, integrate
from core.pathspace import (
    INFINITY,
    Path,
    PathKind,
    PathMeasure,
    StoppingTime,
    TimeGrid,
    is_stopping_time,
    time_min,
    truncate,
    truncate_at,
)
from core.rng import tagged_generator
from core.sampling import (
    compatible_tail,
    random_finite_measure,
    random_label_stopping_time,
    random_path,
    random_path_measure,
    random_stopping_time,
    random_time,
)
from core.schemas import (
    CheckSummary,
    DiffusionConfig,
    DPPReport,
    DppFiniteConfig,
    DppMartConfig,
    FollowerConfig,
    VerifyCoreConfig,
)
from core.settings import get_settings
from diffusion.hjb import hjb_solve, hjb_solve_implicit, viscosity_sweep
from diffusion.sde import TauSpec, build_sde, builtin_objective, check_dpp_mc, default_policies
from dpp.control import check_concatenable, check_disintegrable, verify_dpp
from dpp.martingale import (
    MartingaleSpace,
    all_candidate_laws,
    compensated_square,
    generate_correspondence,
    increment_functional,
    is_canonical_local_mart,
    mart_char_at,
    stepwise_martingale_test,
    verify_dpp_mart,
)
from dpp.trees import INSTANCE_KINDS, TreeInstance, generate_instance, node_state, tree_stopping_times
from follower.follower import (
    FollowerInstance,
    check_dpp_follower,
    check_left_integral_pathwise,
    default_strategies,
    simulate_follower,
)
from follower.oracle import classical_follower_values, oracle_from_config
from follower.tree import check_correspondence_split

logger = logging.getLogger(__name__)

CONCATENATION_BY_KIND = {
    PathKind.CADLAG_STEP: STRICT,
    PathKind.CONTINUOUS_PL: ADJUSTED,
    PathKind.CAGLAD_STEP: ADJUSTED,
    PathKind.CONTROL_CLASS: CONTROL_SPLICE,
}

# Сбой закона: None или описание свидетеля
LawCheck = Callable[[np.random.Generator, PathKind, int], Optional[str]]


@dataclass
class SuiteResult:
    """Строки отчёта, дополнительные таблицы и данные для графиков"""
    ok: bool
    rows: List[Dict[str, Any]]
    checks: List[CheckSummary] = field(default_factory=list)
    plots: Dict[str, Any] = field(default_factory=dict)


def _map(fn: Callable[[Any], Any], items: Sequence[Any]) -> List[Any]:
    """Параллельный map с сохранением порядка"""
    workers = get_settings().workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ==================== ЗАКОНЫ ЯДРА ====================

def _stopping_time(gen: np.random.Generator, omega: Path) -> StoppingTime:
    if omega.kind is PathKind.CONTROL_CLASS:
        return random_label_stopping_time(gen, omega.grid)
    return random_stopping_time(gen, omega.grid)


def _tail(gen: np.random.Generator, omega: Path, t: Any) -> Path:
    if CONCATENATION_BY_KIND[omega.kind] is STRICT:
        return compatible_tail(gen, omega, t)
    return random_path(gen, omega.kind, omega.grid.n_steps)


def law_projection(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    omega = random_path(gen, kind, n_steps)
    s = random_time(gen, omega.grid, allow_infinity=True)
    t = random_time(gen, omega.grid, allow_infinity=True)
    if truncate(truncate(omega, s), t) != truncate(omega, time_min(s, t)):
        return f"T_{t} T_{s} != T_(s^t) on {omega.values}"
    return None


def law_stopping_composition(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    omega = random_path(gen, kind, n_steps)
    tau, kappa = _stopping_time(gen, omega), _stopping_time(gen, omega)
    if truncate_at(truncate_at(omega, kappa), tau) != truncate_at(omega, tau.minimum(kappa)):
        return f"T_tau T_kappa != T_(tau^kappa) for {tau.name}, {kappa.name} on {omega.values}"
    if tau(truncate_at(omega, tau)) != tau(omega):
        return f"tau(T_tau w) != tau(w) for {tau.name} on {omega.values}"
    if not is_stopping_time(tau, omega.grid, [omega]):
        return f"{tau.name} fails the Galmarino property on {omega.values}"
    return None


def law_tc1(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    c = CONCATENATION_BY_KIND[kind]
    omega = random_path(gen, kind, n_steps)
    t = random_time(gen, omega.grid)
    tail = _tail(gen, omega, t)
    if concat(omega, t, tail, c) != concat(truncate(omega, t), t, tail, c):
        return f"w *_t w' != w_(<=t) *_t w' at t={t}"
    return None


def law_tc2(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    c = CONCATENATION_BY_KIND[kind]
    omega = random_path(gen, kind, n_steps)
    t = random_time(gen, omega.grid)
    s = random_time(gen, omega.grid)
    tail = _tail(gen, omega, t)
    joined = truncate(concat(omega, t, tail, c), s)
    expected = truncate(omega, s) if s <= t else concat(omega, t, truncate(tail, s - t), c)
    if joined != expected:
        return f"(w *_t w')_(<=s) differs at t={t}, s={s}"
    return None


def law_shift_inverse(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    c = CONCATENATION_BY_KIND[kind]
    omega = random_path(gen, kind, n_steps)
    t = random_time(gen, omega.grid, allow_infinity=True)
    if concat(omega, t, shift(t, omega, c), c) != omega:
        return f"w *_t theta_t(w) != w at t={t}"
    return None


def law_strict_adjusted_agree(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    if kind is PathKind.CONTROL_CLASS:
        return None
    omega = random_path(gen, kind, n_steps)
    t = random_time(gen, omega.grid)
    tail = compatible_tail(gen, omega, t)
    if concat(omega, t, tail, STRICT) != concat(omega, t, tail, ADJUSTED):
        return f"strict and adjusted concatenations differ on a compatible triple at t={t}"
    return None


def law_split_stopping_time(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    c = CONCATENATION_BY_KIND[kind]
    omega = random_path(gen, kind, n_steps)
    kappa = _stopping_time(gen, omega)
    tau = _stopping_time(gen, omega).maximum(kappa)
    k = kappa(omega)
    tails = [_tail(gen, omega, k if k is not INFINITY else 0) for _ in range(3)]
    split = split_stopping_time(tau, kappa, omega, c, tails)
    result = is_stopping_time(split, omega.grid, tails)
    if not result:
        return f"split time is not a stopping time: {result.detail}"
    if k is INFINITY:
        return None
    # собственный хвост: τ′(θ_κ ω) = τ(ω) − κ(ω)
    whole, part = tau(omega), split(shift_at(kappa, omega, c))
    if (whole is INFINITY) != (part is INFINITY) or (part is not INFINITY and whole != k + part):
        return f"tau(w) = {whole} but kappa + split(theta_kappa w) = {k} + {part}"
    return None


def law_compose_shifted(gen: np.random.Generator, kind: PathKind, n_steps: int) -> Optional[str]:
    c = CONCATENATION_BY_KIND[kind]
    paths = [random_path(gen, kind, n_steps) for _ in range(3)]
    kappa, sigma = _stopping_time(gen, paths[0]), _stopping_time(gen, paths[0])
    composite = compose_shifted_stopping_time(kappa, sigma, c)
    result = is_stopping_time(composite, paths[0].grid, paths)
    if not result:
        return f"{composite.name} is not a stopping time: {result.detail}"
    return None


PATH_LAWS: Dict[str, LawCheck] = {
    "projection": law_projection,
    "stopping_composition": law_stopping_composition,
    "tc1": law_tc1,
    "tc2": law_tc2,
    "shift_inverse": law_shift_inverse,
    "strict_adjusted_agree": law_strict_adjusted_agree,
    "split_stopping_time": law_split_stopping_time,
    "compose_shifted": law_compose_shifted,
}


def _measure_instance(gen: np.random.Generator, n_steps: int):
    pool = [random_path(gen, PathKind.CADLAG_STEP, n_steps) for _ in range(6)]
    mu = random_finite_measure(gen, pool)
    tau = random_stopping_time(gen, pool[0].grid)
    choices = [random_finite_measure(gen, pool) for _ in range(3)]
    nu = Kernel(lambda omega: choices[int(sum(omega.values)) % len(choices)], name="nu")
    return mu, tau, nu


def law_act_ast(gen: np.random.Generator, n_steps: int) -> Optional[str]:
    mu, tau, nu = _measure_instance(gen, n_steps)
    G = lambda omega: omega.terminal
    joined = concat_measure(mu, tau, nu, ADJUSTED)
    if joined.total_mass() != 1:
        return f"mu * nu has mass {joined.total_mass()}"
    direct = integrate(G, joined)
    iterated = 0
    for omega, m in mu.atoms:
        t = tau(omega)
        if t is INFINITY:
            iterated += m * G(omega)
            continue
        head = truncate_at(omega, tau)
        iterated += m * sum((m2 * G(concat(head, t, tail, ADJUSTED)) for tail, m2 in nu(head).atoms), 0)
    if direct != iterated:
        return f"integral against mu * nu is {direct}, iterated integral is {iterated}"
    return None


def law_disintegration(gen: np.random.Generator, n_steps: int) -> Optional[str]:
    mu, tau, _ = _measure_instance(gen, n_steps)
    nu = conditional_kernel(mu, tau, ADJUSTED)
    if concat_measure(mu, tau, nu, ADJUSTED) != mu:
        return f"mu != mu * nu for the conditional kernel at {tau.name}"
    return None


def law_measure_splice(gen: np.random.Generator, n_steps: int) -> Optional[str]:
    """
    Склейка мерозначных путей: TC-1, TC-2 при s ≠ t, TC-2 при s = t
    без атома в момент склейки и обратный сдвиг
    """
    grid = TimeGrid.unit(n_steps)
    mu, nu = random_path_measure(gen, grid), random_path_measure(gen, grid)
    t = random_time(gen, grid)
    s = random_time(gen, grid)
    for c in (MEASURE_SPLICE, MEASURE_SPLICE_RENORMALIZED):
        joined = concat(mu, t, nu, c)
        if joined != concat(truncate(mu, t), t, nu, c):
            return f"measure splice at t={t} depends on atoms after t"
        if s != t:
            expected = truncate(mu, s) if s < t else concat(mu, t, truncate(nu, s - t), c)
            if truncate(joined, s) != expected:
                return f"truncated measure splice differs at t={t}, s={s}"
        head = PathMeasure(grid, tuple(a for a in mu.atoms if a[0] != t))
        tail = PathMeasure(grid, tuple(a for a in nu.atoms if a[0] != 0))
        at_splice = truncate(concat(head, t, tail, c), t)
        if not at_splice == truncate(head, t) == concat(head, t, truncate(tail, 0), c):
            return f"truncated measure splice differs at s = t = {t} without an atom at t"
    if concat(mu, t, shift(t, mu, MEASURE_SPLICE), MEASURE_SPLICE) != mu:
        return f"mu *_t theta_t(mu) != mu at t={t}"
    return None


MEASURE_LAWS = {
    "act_ast": law_act_ast,
    "disintegration": law_disintegration,
    "measure_splice": law_measure_splice,
}


def run_core_suite(config: VerifyCoreConfig) -> SuiteResult:
    """Каждый закон на instances случайных экземплярах для каждого вида пути"""
    checks = []
    for name, law in PATH_LAWS.items():
        for kind in PathKind:
            gen = tagged_generator(config.seed, "core", name, kind.value)
            failure = None
            for i in range(config.instances):
                failure = law(gen, kind, config.n_steps)
                if failure is not None:
                    failure = f"instance {i}: {failure}"
                    break
            checks.append(CheckSummary(
                name=f"{name}[{kind.value}]",
                ok=failure is None,
                checked=config.instances if failure is None else i + 1,
                detail=failure or "",
            ))
    for name, law in MEASURE_LAWS.items():
        gen = tagged_generator(config.seed, "measures", name)
        failure = None
        for i in range(config.measure_instances):
            failure = law(gen, min(config.n_steps, 3))
            if failure is not None:
                failure = f"instance {i}: {failure}"
                break
        checks.append(CheckSummary(
            name=name,
            ok=failure is None,
            checked=config.measure_instances if failure is None else i + 1,
            detail=failure or "",
        ))
    for check in checks:
        if not check.ok:
            logger.warning(f"Law {check.name} fails: {check.detail}")
    rows = [check.model_dump() for check in checks]
    return SuiteResult(ok=all(c.ok for c in checks), rows=rows, checks=checks)


# ==================== КОНЕЧНЫЕ DPP ====================

def verify_instance(inst: TreeInstance, max_measures: Optional[int] = 8, seed: int = 0) -> List[DPPReport]:
    """Склеиваемость, распадаемость и обе стороны DPP для каждого момента экземпляра"""
    P = inst.correspondence()
    taus = inst.stopping_times()
    sample = inst.sample()
    concat_ok = check_concatenable(P, STRICT, taus, sample, max_measures=max_measures, seed=seed)
    disint_ok = check_disintegrable(P, STRICT, taus, sample, max_measures=max_measures, seed=seed)
    cache: Dict[Any, Any] = {}
    reports = []
    for tau in taus:
        report = verify_dpp(P, inst.G, tau, inst.root_path, cache=cache)
        report.instance_id = inst.instance_id
        report.concat_ok = bool(concat_ok)
        report.disint_ok = bool(disint_ok)
        reports.append(report)
    return reports


def _expected(kind: str, report: DPPReport) -> bool:
    if kind == "closed":
        return report.geq and report.leq
    if kind == "concat_only":
        return report.geq
    return report.leq


def run_dpp_finite(config: DppFiniteConfig) -> SuiteResult:
    """
    closed: lhs = rhs; concat_only: lhs ≥ rhs; disint_only: lhs ≤ rhs.
    Строгие нарушения противоположной стороны считаются и сообщаются.
    """
    rows = []
    ok = True
    strict = {kind: 0 for kind in INSTANCE_KINDS}
    jobs = [(kind, i) for kind in INSTANCE_KINDS for i in range(config.instances)]

    def run(job: Tuple[str, int]) -> List[DPPReport]:
        kind, i = job
        inst = generate_instance(
            config.seed, i, depth=config.depth, branching=config.branching,
            n_kernels=config.kernels, kind=kind,
        )
        return verify_instance(inst, seed=config.seed)

    for (kind, i), reports in zip(jobs, _map(run, jobs)):
        for report in reports:
            if not _expected(kind, report):
                ok = False
                logger.warning(f"{report.instance_id} at {report.tau_id}: lhs={report.lhs} rhs={report.rhs}")
            if kind != "closed" and not (report.geq and report.leq):
                strict[kind] += 1
            rows.append(report.model_dump(include={
                "instance_id", "tau_id", "lhs", "rhs", "geq", "leq", "concat_ok", "disint_ok",
            }))
    checks = []
    for kind in ("concat_only", "disint_only"):
        logger.info(f"{kind}: {strict[kind]} stopping times with a strict one-sided gap")
        # без строгого разрыва экземпляры не отличают одну гипотезу от обеих
        checks.append(CheckSummary(
            name=f"strict_gap[{kind}]",
            ok=strict[kind] > 0,
            checked=config.instances,
            detail=f"{strict[kind]} stopping times with a strict gap",
        ))
        if strict[kind] == 0:
            logger.warning(f"No {kind} instance shows a strict gap on the opposite side")
    ok = ok and all(c.ok for c in checks)
    return SuiteResult(ok=ok, rows=rows, checks=checks)


# ==================== МАРТИНГАЛЬНЫЕ DPP ====================

def _equivalence_checks(denominator: int, depth: int) -> List[CheckSummary]:
    """
    На дереве ±1: сеточный и полный тесты совпадают, κ-характеризация
    совпадает с прямым тестом, порождённые законы - ровно несмещённые.
    """
    space = MartingaleSpace(depth=min(depth, 2), moves=(-1, 1))
    F = increment_functional()
    candidates = all_candidate_laws(space, denominator)
    X = node_state()
    _, model = generate_correspondence([F], X, space, denominator)
    generated = set(model.laws(space.root))
    kappas = [StoppingTime.constant(Fraction(0)), StoppingTime.constant(Fraction(1)), StoppingTime.hitting(1, coordinate=lambda node: node.position)]

    grid_mismatch = kappa_mismatch = None
    unbiased = set()
    for mu in candidates:
        direct = bool(is_canonical_local_mart(F, mu))
        if direct:
            unbiased.add(mu)
        if grid_mismatch is None and direct != bool(stepwise_martingale_test(F, mu)):
            grid_mismatch = mu
        for kappa in kappas:
            if kappa_mismatch is None and direct != bool(mart_char_at(F, kappa, mu)):
                kappa_mismatch = (mu, kappa.name)
    n = len(candidates)
    return [
        CheckSummary(name="grid_test_equals_full_test", ok=grid_mismatch is None, checked=n,
                     detail="" if grid_mismatch is None else f"differs on {grid_mismatch!r}"),
        CheckSummary(name="kappa_characterization", ok=kappa_mismatch is None, checked=n * len(kappas),
                     detail="" if kappa_mismatch is None else f"differs at {kappa_mismatch[1]}"),
        CheckSummary(name="generated_equals_unbiased", ok=generated == unbiased, checked=n,
                     detail=f"{len(generated)} generated, {len(unbiased)} unbiased"),
    ]


def run_dpp_mart(config: DppMartConfig) -> SuiteResult:
    """Чётные экземпляры: D = {приращение}, нечётные: D = {приращение, компенсированный квадрат}"""
    checks = _equivalence_checks(config.denominator, config.depth)
    rows = []
    ok = all(c.ok for c in checks)
    for i in range(config.instances):
        gen = tagged_generator(config.seed, "mart", i)
        D = [increment_functional()] if i % 2 == 0 else [increment_functional(), compensated_square()]
        payoff = {x: int(gen.integers(0, 10)) for x in range(-config.depth, config.depth + 1)}
        space = MartingaleSpace(depth=config.depth, moves=(-1, 0, 1))
        taus = tree_stopping_times(config.depth, sorted(payoff))
        report = verify_dpp_mart(
            D, node_state(), lambda omega, payoff=payoff: payoff[omega.terminal.position],
            taus, space, config.denominator,
        )
        instance_id = f"mart-{config.seed}-{i}"
        if not report.hypotheses_ok:
            ok = False
        for r in report.reports:
            if not (r.geq and r.leq):
                ok = False
                logger.warning(f"{instance_id} at {r.tau_id}: lhs={r.lhs} rhs={r.rhs}")
            rows.append({
                "instance_id": instance_id,
                "tau_id": r.tau_id,
                "lhs": r.lhs,
                "rhs": r.rhs,
                "geq": r.geq,
                "leq": r.leq,
                "hypotheses_ok": report.hypotheses_ok,
                "n_laws": report.n_laws.get("root", 0),
            })
    return SuiteResult(ok=ok, rows=rows, checks=checks)


# ==================== ДИФФУЗИЯ ====================

def run_diffusion(config: DiffusionConfig) -> SuiteResult:
    """
    MC-значение против FD-оракула, DPP в момент τ, вязкостная проверка
    сетки и неявная схема как независимая сверка.
    """
    sde = build_sde(config)
    objective = builtin_objective(config.objective, config.objective_width)
    grid = hjb_solve(sde, objective, config.grid_h, horizon=config.horizon)
    implicit = hjb_solve_implicit(sde, objective, config.grid_h, dt=grid.dt, horizon=config.horizon)
    scheme_gap = float(np.max(np.abs(grid.values[0] - implicit.values[0])))
    stride = max(1, (grid.values.shape[0] - 1) // 16)
    checked, failure = viscosity_sweep(grid, sde, r=3, constant=config.viscosity_c, time_stride=stride)
    tau = TauSpec.parse(config.tau)
    radius = tau.param if tau.kind == "ball_exit" else 0.5
    policies = default_policies(sde, target=config.beta_target, radius=radius)
    tolerance_fd = 5 * (grid.h + math.sqrt(config.dt))

    def point(x0: float) -> Dict[str, Any]:
        report = check_dpp_mc(
            sde, policies, objective, [x0], tau, grid, config.dt, config.paths, config.seed, config.horizon,
        )
        v_fd = float(grid(0.0, [x0])[0])
        return {
            "x0": x0,
            "v_mc": report.lhs,
            "stderr": report.lhs_stderr,
            "v_fd": v_fd,
            "dpp_lhs": report.lhs,
            "dpp_rhs": report.rhs,
            "z": report.z,
        }

    rows = _map(point, list(config.x0))
    ok = failure is None
    for row in rows:
        gap = abs(row["v_mc"] - row["v_fd"])
        if gap > max(3 * row["stderr"], tolerance_fd):
            ok = False
            logger.warning(f"MC value {row['v_mc']:.5f} and FD value {row['v_fd']:.5f} differ by {gap:.5f} at x0={row['x0']:g}")
        if abs(row["z"]) > 3:
            ok = False
            logger.warning(f"DPP residual z={row['z']:.2f} at x0={row['x0']:g}")
    checks = [
        CheckSummary(name="viscosity", ok=failure is None, checked=checked,
                     detail="" if failure is None else f"node {failure.node}: h_super={failure.h_super:.4g}, h_sub={failure.h_sub:.4g}"),
        CheckSummary(name="implicit_scheme_gap", ok=True, checked=len(grid.x), detail=f"{scheme_gap:.3e}"),
    ]
    logger.info(f"Explicit and implicit schemes differ by {scheme_gap:.3e} at t=0")
    return SuiteResult(ok=ok, rows=rows, checks=checks, plots={"grid": grid, "rows": rows})


# ==================== ПРЕСЛЕДОВАНИЕ ====================

def run_follower(config: FollowerConfig) -> SuiteResult:
    """MC против DP-оракула, DPP в момент выхода, точность левого интеграла и дерево"""
    inst = FollowerInstance.from_config(config)
    oracle = oracle_from_config(config)
    values = classical_follower_values(config, oracle)
    strategies = default_strategies(config) + [oracle.strategy()]

    def point(x0: float):
        return check_dpp_follower(
            inst, strategies, x0, oracle.value, config.dt, config.paths, config.seed, radius=config.tau_radius,
        )

    reports = _map(point, list(config.x0))
    rows = []
    ok = True
    for value, report in zip(values, reports):
        if abs(value.v_mc - value.v_dp) > max(3 * value.stderr, abs(value.delta_bias)):
            ok = False
            logger.warning(f"Follower MC {value.v_mc:.5f} and DP {value.v_dp:.5f} disagree at x0={value.x0:g}")
        if abs(report.z) > 3:
            ok = False
            logger.warning(f"Follower DPP residual z={report.z:.2f} at x0={value.x0:g}")
        rows.append({
            "x0": value.x0,
            "v_mc": value.v_mc,
            "stderr": value.stderr,
            "v_dp": value.v_dp,
            "dpp_lhs": report.lhs,
            "dpp_rhs": report.rhs,
            "z": report.z,
            "delta_bias": value.delta_bias,
        })

    law = simulate_follower(inst, oracle.strategy(), config.x0[0], config.dt, min(config.paths, 256), config.seed)
    pathwise = check_left_integral_pathwise(inst, law)
    split = check_correspondence_split(depth=2, seed=config.seed)
    split_ok = split.p_c_concatenable and split.p_l_concatenable and split.intersection_disintegrable and split.dpp_equal
    checks = [
        CheckSummary(name="left_integral_pathwise", ok=bool(pathwise), checked=pathwise.checked, detail=pathwise.detail),
        CheckSummary(name="tree_split", ok=split_ok, checked=sum(split.n_laws.values()),
                     detail=split.detail or f"value {split.lhs}"),
    ]
    ok = ok and all(c.ok for c in checks)
    return SuiteResult(ok=ok, rows=rows, checks=checks, plots={"oracle": oracle, "rows": rows})
