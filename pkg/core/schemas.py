"""
Pydantic-модели конфигураций запусков и отчётов проверок
"""
from datetime import datetime
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

# Точные и float значения в отчётах
ExtendedReal = Union[Fraction, int, float]


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


# ==================== CONFIGS ====================

class RunConfigBase(BaseModel):
    """Базовая модель конфигурации запуска: неизвестные ключи запрещены"""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(..., ge=0)


class VerifyCoreConfig(RunConfigBase):
    """Наборы алгебраических законов для путей, конкатенаций и мер"""
    instances: int = Field(default=1000, ge=1)
    measure_instances: int = Field(default=200, ge=1)
    n_steps: int = Field(default=4, ge=1, le=8)


class DppFiniteConfig(RunConfigBase):
    """Параметры генератора конечных деревьев"""
    depth: int = Field(default=3, ge=1, le=5)
    branching: int = Field(default=2, ge=2, le=3)
    kernels: int = Field(default=3, ge=1, le=4)
    instances: int = Field(default=50, ge=1)


class DppMartConfig(RunConfigBase):
    """Параметры мартингальных деревьев"""
    denominator: int = Field(default=8, ge=2, le=16)
    depth: int = Field(default=2, ge=1, le=3)
    instances: int = Field(default=50, ge=1)


class DiffusionConfig(RunConfigBase):
    """
    Эталонная задача управляемой диффузии.

    Коэффициенты выбираются по имени из встроенной библиотеки.
    """
    dim: Literal[1] = 1
    labels: List[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0])
    beta: Literal["control", "constant", "ou"] = "control"
    beta_scale: float = 1.0
    beta_target: float = 0.0
    sigma: Literal["constant", "zero"] = "constant"
    sigma_scale: float = Field(default=1.0, ge=0)
    domain_low: float = -2.0
    domain_high: float = 2.0
    objective: Literal["bump", "tent", "capped_square", "identity_clip"] = "bump"
    objective_width: float = Field(default=1.0, gt=0)
    horizon: float = Field(default=1.0, gt=0)
    dt: float = Field(default=1 / 256, gt=0)
    grid_h: float = Field(default=0.05, gt=0)
    paths: int = Field(default=20000, ge=2)
    x0: List[float] = Field(default_factory=lambda: [-1.0, -0.5, 0.0, 0.5, 1.0])
    tau: str = "ball_exit:0.5"
    viscosity_c: float = Field(default=10.0, gt=0)

    @field_validator("labels", "x0", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _split_list(value)


class FollowerConfig(RunConfigBase):
    """Классическая задача монотонного преследования"""
    horizon: float = Field(default=1.0, gt=0)
    dt: float = Field(default=1 / 64, gt=0)
    paths: int = Field(default=20000, ge=2)
    x0: List[float] = Field(default_factory=lambda: [-0.5, 0.0, 0.5, 1.0])
    drift: float = 0.0
    volatility: float = Field(default=1.0, gt=0)
    fuel: Literal["constant", "decaying"] = "constant"
    fuel_price: float = Field(default=0.5, ge=0)
    running_weight: float = Field(default=1.0, ge=0)
    terminal_weight: float = Field(default=1.0, ge=0)
    delta: float = Field(default=0.1, gt=0)
    barriers: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0])
    tau_radius: float = Field(default=0.5, gt=0)
    dp_h: float = Field(default=0.025, gt=0)
    dp_extent: float = Field(default=4.0, gt=0)
    quadrature_nodes: int = Field(default=9, ge=3, le=41)

    @field_validator("x0", "barriers", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _split_list(value)


# ==================== REPORTS ====================

class ReportBase(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)


class DPPReport(ReportBase):
    """Обе стороны DPP и вердикты неравенств"""
    instance_id: str = ""
    tau_id: str = ""
    lhs: ExtendedReal
    rhs: ExtendedReal
    geq: bool
    leq: bool
    concat_ok: Optional[bool] = None
    disint_ok: Optional[bool] = None
    orientation: Literal["sup", "inf"] = "sup"

    @property
    def equal(self) -> bool:
        return self.geq and self.leq


class MartDPPReport(ReportBase):
    """DPP для мартингально-порождённых соответствий с проверками гипотез"""
    hypotheses: Dict[str, bool]
    n_laws: Dict[str, int] = Field(default_factory=dict)
    reports: List[DPPReport] = Field(default_factory=list)

    @property
    def hypotheses_ok(self) -> bool:
        return all(self.hypotheses.values())


class MCDPPReport(ReportBase):
    """Монте-Карло проверка DPP в момент остановки"""
    x0: float
    tau: str
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    z: float
    policy: str = ""
    orientation: Literal["sup", "inf"] = "sup"


class ValueEstimate(ReportBase):
    """Оценка функции цены по классу политик"""
    value: float
    stderr: float
    policy: str
    per_policy: Dict[str, float] = Field(default_factory=dict)


class ViscosityReport(ReportBase):
    node: Tuple[int, int]
    t: float
    x: float
    supersolution: bool
    subsolution: bool
    h_super: float
    h_sub: float
    tolerance: float


class ResidualReport(ReportBase):
    """Регрессионный тест нулевого условного среднего приращений"""
    max_z: float
    max_abs_residual: float
    interval_z: List[float] = Field(default_factory=list)
    n_intervals: int = 0


class FollowerValue(ReportBase):
    x0: float
    v_mc: float
    stderr: float
    v_dp: float
    delta_bias: float
    strategy: str = ""


class SplitReport(ReportBase):
    """Проверка P̄ = P̄_c ∩ P̄_l на конечном дереве"""
    p_c_concatenable: bool
    p_l_concatenable: bool
    intersection_disintegrable: bool
    # та же проверка без исправления ядра на нулевых ячейках
    unrepaired_disintegrable: bool = False
    dpp_equal: bool
    lhs: ExtendedReal
    rhs: ExtendedReal
    n_laws: Dict[str, int] = Field(default_factory=dict)
    detail: str = ""
    orientation: Literal["sup", "inf"] = "inf"


class CheckSummary(ReportBase):
    name: str
    ok: bool
    checked: int = 0
    detail: str = ""


class RunManifest(ReportBase):
    """Манифест запуска: всё, что нужно для воспроизведения выходных файлов"""
    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    versions: Dict[str, str]
    started_at: datetime
    wall_time_sec: float
    outputs: List[str]
    exit_code: int
