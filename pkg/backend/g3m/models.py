import re
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator
from pydantic_settings import TomlConfigSettingsSource
from typing_extensions import Self

from g3m.core.config import Settings, parse_real, parse_reals
from g3m.core.errors import InvalidInputError
from g3m.dynamic import WeightSchedule
from g3m.market import MarketParams
from g3m.montecarlo import McMode
from g3m.pool import PoolState, PriceVector
from g3m.replication import BsParams, PayoffSpec

Real = Annotated[float, BeforeValidator(parse_real)]
Reals = Annotated[list[float], BeforeValidator(parse_reals)]
Matrix = Annotated[list[list[float]], BeforeValidator(parse_reals)]

ASSET_COLUMN = re.compile(r"[wR]_\d+")


class Document(BaseModel):
    # unknown keys are errors: a typo must not silently change an experiment
    model_config = ConfigDict(extra="forbid", frozen=True)


# Config sections
class MarketSpec(Document):
    r: Real = 0.0
    sigma: Reals = Field(min_length=1)
    corr: Matrix | None = None

    def to_params(self) -> MarketParams:
        corr = np.eye(len(self.sigma)) if self.corr is None else np.array(self.corr)
        return MarketParams(r=self.r, sigma=np.array(self.sigma), corr=corr)


class PoolSpec(Document):
    reserves: Reals = Field(min_length=2)
    weights: Reals = Field(min_length=2)
    # external prices at the start of the run
    prices: Reals = Field(min_length=2)
    arbitrage: bool = True

    def to_pool(self) -> PoolState:
        return PoolState(reserves=np.array(self.reserves), weights=np.array(self.weights))

    def to_prices(self) -> PriceVector:
        return PriceVector(np.array(self.prices))


class ScheduleSpec(Document):
    kind: Literal["constant", "linear", "table"]
    weights: Reals | None = None
    start: Reals | None = None
    end: Reals | None = None
    t0: Real = 0.0
    t1: Real | None = None
    times: Reals | None = None
    table: Matrix | None = None

    @model_validator(mode="after")
    def _fields_for_kind(self) -> Self:
        needed = {
            "constant": ("weights",),
            "linear": ("start", "end"),
            "table": ("times", "table"),
        }[self.kind]
        missing = [name for name in needed if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind} schedule needs {', '.join(missing)}")
        return self

    def to_schedule(self, horizon: float) -> WeightSchedule:
        if self.kind == "constant":
            return WeightSchedule.constant(np.array(self.weights))
        if self.kind == "linear":
            t1 = horizon if self.t1 is None else self.t1
            return WeightSchedule.linear(
                np.array(self.start), np.array(self.end), self.t0, t1
            )
        return WeightSchedule.table(np.array(self.times), np.array(self.table))


class McSpec(Document):
    paths: int = Field(default=20_000, ge=100)
    steps: int = Field(default=1, ge=1)
    mode: McMode = McMode.CLOSED_PAYOFF
    antithetic: bool = False
    workers: int = Field(default=1, ge=1)


class PriceScenario(Document):
    name: str = Field(min_length=1)
    market: MarketSpec
    pool: PoolSpec
    schedule: ScheduleSpec | None = None
    horizon: Real = Field(default=1.0, gt=0)
    quad_steps: int = Field(default=1_000, ge=1)


class PayoffConfig(Document):
    kind: Literal["forward", "call", "put", "protective-put", "covered-call", "power"]
    strike: Real = Field(default=100.0, ge=0)
    expiry: Real = Field(default=1.0, gt=0)
    sigma: Real = Field(default=0.2, gt=0)
    r: Real = 0.0
    exponent: Real | None = None

    @model_validator(mode="after")
    def _exponent_for_power(self) -> Self:
        if self.kind == "power" and self.exponent is None:
            raise ValueError("power payoff needs an exponent")
        return self

    def bs_params(self) -> BsParams | None:
        if self.kind in ("forward", "power"):
            return None
        return BsParams(r=self.r, sigma_alpha=self.sigma, K=self.strike, T=self.expiry)

    def to_spec(self) -> PayoffSpec:
        if self.kind == "forward":
            return PayoffSpec.forward(self.strike, self.r, self.expiry)
        if self.kind == "power":
            assert self.exponent is not None
            return PayoffSpec.power(self.exponent)
        p = self.bs_params()
        assert p is not None
        return {
            "call": PayoffSpec.call,
            "put": PayoffSpec.put,
            "protective-put": PayoffSpec.protective_put,
            "covered-call": PayoffSpec.covered_call,
        }[self.kind](p)


class ReplicationSpec(Document):
    payoff: PayoffConfig
    s0: Real = Field(default=100.0, gt=0)
    # volatility of the simulated paths; defaults to the payoff's model volatility
    path_sigma: Real | None = Field(default=None, gt=0)
    paths: int = Field(default=200, ge=1)
    steps: int = Field(default=2_000, ge=1)
    reweight_every: int = Field(default=1, ge=1)
    leakage: bool = False
    x_grid: Reals | None = None
    t_grid: Reals | None = None

    def check_grids(self) -> tuple[list[float], list[float]]:
        k = self.payoff.strike or self.s0
        x_grid = self.x_grid or np.geomspace(k / 4, 4 * k, 41).tolist()
        t_grid = self.t_grid or np.linspace(0.0, self.payoff.expiry, 8, endpoint=False).tolist()
        return x_grid, t_grid


class SimulationSpec(Document):
    market: MarketSpec
    pool: PoolSpec
    schedule: ScheduleSpec
    horizon: Real = Field(default=1.0, gt=0)
    steps: int = Field(default=50, ge=1)
    reweight_every: int = Field(default=1, ge=1)
    path_index: int = Field(default=0, ge=0)


def _default_w_grid() -> list[float]:
    return np.linspace(0.0, 1.0, 21).tolist()


class EtaFigureSpec(Document):
    sigma_a: Real = Field(default=0.3, gt=0)
    sigma_b: Real = Field(default=0.2, gt=0)
    tau: Real = Field(default=1.0, ge=0)
    rho_grid: Reals = [0.0, 0.25, 0.5, 0.75, 1.0]
    w_grid: Reals = Field(default_factory=_default_w_grid)
    sigma_grid: Reals = [0.1, 0.2, 0.3, 0.4, 0.5]
    rho: Real = 0.0


class WeightsFigureSpec(Document):
    K: Real = Field(default=100.0, gt=0)
    sigma: Real = Field(default=0.2, gt=0)
    r: Real = 0.0
    x_grid: Reals = Field(default_factory=lambda: np.linspace(50.0, 150.0, 21).tolist())
    tau_grid: Reals = [0.25, 0.5, 0.75, 1.0]


class FigureSpec(Document):
    eta: EtaFigureSpec = EtaFigureSpec()
    weights: WeightsFigureSpec = WeightsFigureSpec()


# The whole run document
class ScenarioConfig(Document):
    seed: int = Field(default=0, ge=0, lt=2**64)
    output: Path | None = None
    mc: McSpec | None = None
    scenarios: list[PriceScenario] = []
    simulation: SimulationSpec | None = None
    replication: ReplicationSpec | None = None
    figure: FigureSpec = FigureSpec()


def load_config(path: Path) -> ScenarioConfig:
    if not path.is_file():
        raise InvalidInputError(f"config file not found: {path}")
    try:
        data = TomlConfigSettingsSource(Settings, toml_file=path).toml_data
    except ValueError as e:
        raise InvalidInputError(f"{path}: {e}")
    return ScenarioConfig.model_validate(data)


# Emitted rows; Monte Carlo columns stay empty when no [mc] section is given
class PriceRow(BaseModel):
    experiment: str
    closed_form: float
    mc_mean: float | None = None
    mc_stderr: float | None = None
    z_score: float | None = None
    g0: float
    arbitrage_profit: float
    eta: float


class ReplicationRow(BaseModel):
    label: str
    max_abs_error: float
    max_rel_error: float
    terminal_gap: float
    rel_terminal_gap: float


class EtaRow(BaseModel):
    panel: Literal["rho", "sigma"]
    w: float
    rho_or_sigma: float
    eta: float


class WeightRow(BaseModel):
    x: float
    tau: float
    w: float


class TrajectoryRow(BaseModel):
    """One grid time of a re-weighting run; ``w_i`` and ``R_i`` columns ride along as extras."""

    model_config = ConfigDict(extra="allow")

    time: float
    V: float = Field(gt=0)
    G: float = Field(gt=0)

    @model_validator(mode="after")
    def check_asset_columns(self) -> Self:
        for name, value in (self.model_extra or {}).items():
            if not ASSET_COLUMN.fullmatch(name):
                raise ValueError(f"unexpected trajectory column {name!r}")
            if not isinstance(value, float | int) or value < 0:
                raise ValueError(f"{name} must be a non-negative number")
        return self
