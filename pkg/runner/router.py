"""
Роутер подкоманд: имя, модель конфигурации, флаги и обработчик
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple, Type

from core.schemas import (
    DiffusionConfig,
    DppFiniteConfig,
    DppMartConfig,
    FollowerConfig,
    RunConfigBase,
    VerifyCoreConfig,
)

from . import suites
from .suites import SuiteResult

logger = logging.getLogger(__name__)

Handler = Callable[[RunConfigBase], SuiteResult]


@dataclass
class Route:
    name: str
    config_model: Type[RunConfigBase]
    handler: Handler
    columns: Tuple[str, ...]
    flags: Tuple[str, ...] = ()
    summary: str = ""


@dataclass
class CommandRouter:
    """Реестр подкоманд; регистрация декоратором @router.command(...)"""
    routes: Dict[str, Route] = field(default_factory=dict)

    def command(
        self,
        name: str,
        config_model: Type[RunConfigBase],
        columns: Tuple[str, ...],
        flags: Tuple[str, ...] = (),
    ) -> Callable[[Handler], Handler]:
        def decorator(handler: Handler) -> Handler:
            if name in self.routes:
                raise ValueError(f"Command {name!r} is registered twice")
            summary = (handler.__doc__ or "").strip().splitlines()[0] if handler.__doc__ else ""
            self.routes[name] = Route(name, config_model, handler, columns, flags, summary)
            return handler
        return decorator

    def get(self, name: str) -> Route:
        return self.routes[name]

    @property
    def names(self) -> List[str]:
        return list(self.routes)


router = CommandRouter()

DPP_COLUMNS = ("instance_id", "tau_id", "lhs", "rhs", "geq", "leq")


# ==================== COMMANDS ====================

@router.command("verify-core", VerifyCoreConfig, columns=("name", "ok", "checked", "detail"))
def verify_core(config: VerifyCoreConfig) -> SuiteResult:
    """Algebraic laws of paths, concatenations, stopping times and measures"""
    return suites.run_core_suite(config)


@router.command(
    "dpp-finite", DppFiniteConfig,
    columns=DPP_COLUMNS + ("concat_ok", "disint_ok"),
    flags=("depth",),
)
def dpp_finite(config: DppFiniteConfig) -> SuiteResult:
    """Both DPP inequalities on random finite trees"""
    return suites.run_dpp_finite(config)


@router.command(
    "dpp-mart", DppMartConfig,
    columns=DPP_COLUMNS + ("hypotheses_ok", "n_laws"),
    flags=("denominator", "depth"),
)
def dpp_mart(config: DppMartConfig) -> SuiteResult:
    """DPP for martingale-generated correspondences on lattice trees"""
    return suites.run_dpp_mart(config)


@router.command(
    "diffusion", DiffusionConfig,
    columns=("x0", "v_mc", "stderr", "v_fd", "dpp_lhs", "dpp_rhs", "z"),
)
def diffusion(config: DiffusionConfig) -> SuiteResult:
    """Controlled diffusion: Monte Carlo value, finite-difference oracle and DPP at a stopping time"""
    return suites.run_diffusion(config)


@router.command(
    "follower", FollowerConfig,
    columns=("x0", "v_mc", "stderr", "v_dp", "dpp_lhs", "dpp_rhs", "z", "delta_bias"),
)
def follower(config: FollowerConfig) -> SuiteResult:
    """Monotone follower: Monte Carlo value, DP oracle and DPP at the exit time"""
    return suites.run_follower(config)
