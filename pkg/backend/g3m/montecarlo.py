"""Monte Carlo checks of the closed-form LP prices.

Paths are split into chunks that may run on several threads. Every path draws
from its own Philox stream and sums use ``math.fsum``, so estimates do not
depend on the chunk size or the number of workers.
"""

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from g3m.core.config import settings
from g3m.core.errors import InvalidInputError
from g3m.dynamic import WeightSchedule, require_deterministic
from g3m.market import MarketParams, PathGrid, PricePath, simulate_batch
from g3m.pool import (
    FloatArray,
    PoolState,
    PriceVector,
    geometric_mean,
    payoff_closed_form,
    rebalance_reserves,
    require_balanced,
)

logger = logging.getLogger(__name__)


class McMode(str, Enum):
    CLOSED_PAYOFF = "closed-payoff"
    FINE_REBALANCE = "fine-rebalance"


class RealizedStat(str, Enum):
    RATIO_VOL = "ratio-vol"
    WGM_VOL = "wgm-vol"
    MEAN_TERMINAL = "mean-terminal"


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    grid: PathGrid
    seed: int
    mode: McMode = McMode.CLOSED_PAYOFF
    antithetic: bool = False
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.n_paths < settings.MC_MIN_PATHS:
            raise InvalidInputError(
                f"Monte Carlo needs at least {settings.MC_MIN_PATHS} paths"
            )
        if self.antithetic and self.n_paths % 2:
            raise InvalidInputError("antithetic sampling needs an even path count")
        object.__setattr__(self, "mode", McMode(self.mode))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int

    def z_score(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.std_error

    def agrees_with(self, reference: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - reference) <= n_se * self.std_error


def estimate(samples: npt.ArrayLike, antithetic: bool = False) -> McEstimate:
    """Sample mean and standard error; antithetic pairs are averaged first."""
    x = np.asarray(samples, dtype=np.float64)
    n_paths = len(x)
    if antithetic:
        x = 0.5 * (x[0::2] + x[1::2])
    m = len(x)
    if m < 2:
        raise InvalidInputError("an estimate needs at least two samples")
    mean = math.fsum(x) / m
    var = math.fsum((x - mean) ** 2) / (m - 1)
    return McEstimate(mean=mean, std_error=math.sqrt(var / m), n_paths=n_paths)


def _run_chunks(cfg: McConfig, job: Callable[[int, int], FloatArray]) -> FloatArray:
    size = settings.MC_CHUNK_SIZE
    if cfg.antithetic and size % 2:
        size += 1
    bounds = [(a, min(a + size, cfg.n_paths)) for a in range(0, cfg.n_paths, size)]
    workers = cfg.workers or settings.MC_WORKERS
    if workers == 1 or len(bounds) == 1:
        parts = [job(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: job(*ab), bounds))
    logger.info("simulated %d paths in %d chunks", cfg.n_paths, len(bounds))
    return np.concatenate(parts)


def _check_horizon(cfg: McConfig, horizon: float) -> None:
    if not math.isclose(cfg.grid.T - cfg.grid.t0, horizon, rel_tol=1e-12):
        raise InvalidInputError(
            f"grid covers {cfg.grid.T - cfg.grid.t0}, horizon is {horizon}"
        )


def price_lp_mc(
    pool: PoolState,
    params: MarketParams,
    s0: PriceVector,
    cfg: McConfig,
    horizon: float,
) -> McEstimate:
    """Discounted expected LP payoff of a constant-weight pool.

    ``closed-payoff`` evaluates the terminal payoff in closed form; ``fine-rebalance``
    arbitrages the reserves at every grid step and values them at the end.
    """
    _check_horizon(cfg, horizon)
    if pool.n != params.n or s0.n != params.n:
        raise InvalidInputError("pool, market and prices disagree on asset count")
    require_balanced(pool, s0)
    held = pool.weights > 0
    v = geometric_mean(pool)
    w = pool.weights
    discount = math.exp(-params.r * horizon)

    def job(start: int, stop: int) -> FloatArray:
        paths = simulate_batch(params, s0, cfg.grid, cfg.seed, start, stop, cfg.antithetic)
        if cfg.mode is McMode.CLOSED_PAYOFF:
            return discount * np.asarray(payoff_closed_form(v, w, paths[:, -1]))
        reserves = np.broadcast_to(pool.reserves, (stop - start, pool.n))
        for k in range(1, cfg.grid.steps + 1):
            v_now = np.exp(np.sum(w[held] * np.log(reserves[:, held]), axis=1))
            reserves = rebalance_reserves(v_now, w, paths[:, k])
        return discount * np.sum(reserves * paths[:, -1], axis=1)

    return estimate(_run_chunks(cfg, job), cfg.antithetic)


def price_dynamic_mc(
    g0: float,
    schedule: WeightSchedule,
    params: MarketParams,
    s0: PriceVector,
    cfg: McConfig,
    horizon: float,
) -> McEstimate:
    """Discounted expected payoff of a pool following a deterministic weight schedule.

    The payoff accumulates ``w_i(t_k) dlog S_i`` over the grid (the continuous-limit
    payoff), whatever ``cfg.mode`` says.
    """
    require_deterministic(schedule)
    _check_horizon(cfg, horizon)
    if schedule.n != params.n or s0.n != params.n:
        raise InvalidInputError("schedule, market and prices disagree on asset count")
    if g0 <= 0:
        raise InvalidInputError("initial payoff must be positive")
    w = schedule.weights_at(cfg.grid.times)[:-1]
    discount = math.exp(-params.r * horizon)

    def job(start: int, stop: int) -> FloatArray:
        paths = simulate_batch(params, s0, cfg.grid, cfg.seed, start, stop, cfg.antithetic)
        log_steps = np.diff(np.log(paths), axis=1)
        return discount * g0 * np.exp(np.sum(log_steps * w, axis=(1, 2)))

    return estimate(_run_chunks(cfg, job), cfg.antithetic)


def _per_path_variance(series: FloatArray, dt: float) -> FloatArray:
    return np.asarray(np.var(np.diff(series, axis=1), axis=1, ddof=1) / dt)


def _vol_estimate(variances: FloatArray, n_paths: int) -> McEstimate:
    var_est = estimate(variances)
    vol = math.sqrt(max(var_est.mean, 0.0))
    se = var_est.std_error / (2.0 * vol) if vol > 0 else 0.0
    return McEstimate(mean=vol, std_error=se, n_paths=n_paths)


def realized_stat(
    paths: Sequence[PricePath],
    stat: RealizedStat | str,
    *,
    pair: tuple[int, int] = (0, 1),
    weights: npt.ArrayLike | None = None,
    asset: int = 0,
) -> McEstimate:
    """Pooled realized statistic over simulated paths.

    Volatilities are the square root of the mean per-path realized variance of
    log increments; the standard error follows by the delta method.
    """
    try:
        stat = RealizedStat(stat)
    except ValueError:
        raise InvalidInputError(f"unknown statistic {stat!r}")
    if len(paths) < 2:
        raise InvalidInputError("realized statistics need at least two paths")
    grid = paths[0].grid
    if any(p.grid != grid for p in paths):
        raise InvalidInputError("paths must share one grid")
    values = np.stack([p.values for p in paths])
    if stat is RealizedStat.MEAN_TERMINAL:
        return estimate(values[:, -1, asset])
    if stat is RealizedStat.RATIO_VOL:
        a, b = pair
        series = np.log(values[:, :, a]) - np.log(values[:, :, b])
    else:
        if weights is None:
            raise InvalidInputError("wgm-vol needs the pool weights")
        w = np.asarray(weights, dtype=np.float64)
        series = np.log(values) @ w
    return _vol_estimate(_per_path_variance(series, grid.dt), len(paths))


class ExperimentRecord(NamedTuple):
    experiment: str
    closed_form: float
    mc_mean: float
    mc_stderr: float
    z_score: float


def experiment_row(name: str, closed_form: float, est: McEstimate) -> ExperimentRecord:
    return ExperimentRecord(
        experiment=name,
        closed_form=closed_form,
        mc_mean=est.mean,
        mc_stderr=est.std_error,
        z_score=est.z_score(closed_form),
    )
