"""Pools whose weights move over time.

Weights are updated at the grid times of a price path and held in between.
Three views of the same mechanism live here:

* ``discrete_payoff`` evaluates the re-weighted geometric mean in closed form,
* ``simulate_reweighting_pool`` steps a ``PoolState`` through every rebalance
  and weight update and is the oracle for the closed form,
* ``continuous_payoff`` / ``wgm_continuous`` are the small-interval limit where
  ``log G`` accumulates ``w_i d log S_i`` as a left-endpoint (Ito) sum.

Every arbitraged weight jump from ``w`` to ``u`` multiplies the pool value by
``prod((w_i / u_i) ** u_i)``, which is at most one; see ``reweight_loss``.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
import pandas as pd

from g3m.core.config import settings
from g3m.core.errors import InvalidInputError
from g3m.market import PricePath
from g3m.pool import (
    FloatArray,
    PoolState,
    PriceVector,
    arbitrage_rebalance,
    as_vector,
    geometric_mean,
    payoff_closed_form,
    pool_value,
)

logger = logging.getLogger(__name__)

# (times, prices or None) -> weights, one row per time
WeightRule = Callable[[FloatArray, FloatArray | None], npt.ArrayLike]


class ScheduleKind(str, Enum):
    DETERMINISTIC = "deterministic-function"
    TABLE = "piecewise-table"
    STATE = "state-dependent-rule"


@dataclass(frozen=True)
class WeightSchedule:
    kind: ScheduleKind
    rule: WeightRule
    n: int

    @property
    def is_deterministic(self) -> bool:
        return self.kind is not ScheduleKind.STATE

    def weights_at(
        self, times: npt.ArrayLike, prices: FloatArray | None = None
    ) -> FloatArray:
        t = np.atleast_1d(np.asarray(times, dtype=np.float64))
        if self.kind is ScheduleKind.STATE:
            if prices is None:
                raise InvalidInputError("a state-dependent schedule needs prices")
            prices = np.atleast_2d(prices)
        else:
            # deterministic kinds never see prices
            prices = None
        w = np.atleast_2d(np.asarray(self.rule(t, prices), dtype=np.float64))
        if w.shape != (len(t), self.n):
            raise InvalidInputError(
                f"schedule produced weights of shape {w.shape}, expected {(len(t), self.n)}"
            )
        if np.any(w < 0) or np.any(w > 1):
            raise InvalidInputError("schedule produced weights outside [0, 1]")
        if np.any(np.abs(w.sum(axis=1) - 1.0) > settings.WEIGHT_SUM_TOL):
            raise InvalidInputError("schedule produced weights not summing to 1")
        return w

    def at(self, t: float, prices: PriceVector | None = None) -> FloatArray:
        s = None if prices is None else prices.prices
        return self.weights_at([t], s)[0]

    def along(self, path: PricePath) -> FloatArray:
        """Weights at every grid time of ``path``, shape ``(steps + 1, n)``."""
        if path.n != self.n:
            raise InvalidInputError(f"schedule has {self.n} assets, path has {path.n}")
        return self.weights_at(path.times, path.values)

    @classmethod
    def constant(cls, weights: npt.ArrayLike) -> "WeightSchedule":
        w = as_vector(weights, "weights")

        def rule(t: FloatArray, _: FloatArray | None) -> FloatArray:
            return np.tile(w, (len(t), 1))

        return cls(kind=ScheduleKind.DETERMINISTIC, rule=rule, n=len(w))

    @classmethod
    def linear(
        cls, start: npt.ArrayLike, end: npt.ArrayLike, t0: float, t1: float
    ) -> "WeightSchedule":
        """Move linearly from ``start`` at ``t0`` to ``end`` at ``t1``, flat outside."""
        a, b = as_vector(start, "start weights"), as_vector(end, "end weights")
        if len(a) != len(b) or not t1 > t0:
            raise InvalidInputError("linear schedule needs matching vectors and t1 > t0")

        def rule(t: FloatArray, _: FloatArray | None) -> FloatArray:
            frac = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)[:, None]
            return (1.0 - frac) * a + frac * b

        return cls(kind=ScheduleKind.DETERMINISTIC, rule=rule, n=len(a))

    @classmethod
    def table(cls, times: npt.ArrayLike, weights: npt.ArrayLike) -> "WeightSchedule":
        """Piecewise constant: row ``k`` is in force from ``times[k]`` on."""
        knots = as_vector(times, "knot times")
        table = np.array(weights, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != len(knots):
            raise InvalidInputError("weight table needs one row per knot time")
        if np.any(np.diff(knots) <= 0):
            raise InvalidInputError("knot times must be increasing")

        def rule(t: FloatArray, _: FloatArray | None) -> FloatArray:
            idx = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 1)
            return table[idx]

        return cls(kind=ScheduleKind.TABLE, rule=rule, n=table.shape[1])

    @classmethod
    def state_dependent(cls, rule: WeightRule, n: int) -> "WeightSchedule":
        return cls(kind=ScheduleKind.STATE, rule=rule, n=n)


def require_deterministic(schedule: WeightSchedule) -> None:
    if not schedule.is_deterministic:
        raise InvalidInputError("operation requires a deterministic weight schedule")


def _xlogy_ratio(u: FloatArray, w: FloatArray) -> FloatArray:
    # u * log(u / w) with 0 * log(0 / w) = 0
    out = np.zeros(np.broadcast(u, w).shape)
    held = np.broadcast_to(u > 0, out.shape)
    uu, ww = np.broadcast_to(u, out.shape), np.broadcast_to(w, out.shape)
    with np.errstate(divide="ignore"):
        out[held] = uu[held] * (np.log(uu[held]) - np.log(ww[held]))
    return out


def reweight_loss(w_old: npt.ArrayLike, w_new: npt.ArrayLike) -> float:
    """Pool-value factor of one arbitraged weight jump, ``exp(-KL(w_new || w_old))``."""
    a, b = np.asarray(w_old, dtype=np.float64), np.asarray(w_new, dtype=np.float64)
    if np.any((b > 0) & (a <= 0)):
        # weight on an asset the pool holds none of: value cannot be carried over
        return 0.0
    return float(np.exp(-np.sum(_xlogy_ratio(b, a))))


def discrete_v_update(
    v_prev: float, reserves: npt.ArrayLike, w_old: npt.ArrayLike, w_new: npt.ArrayLike
) -> float:
    r = np.asarray(reserves, dtype=np.float64)
    dw = np.asarray(w_new, dtype=np.float64) - np.asarray(w_old, dtype=np.float64)
    if abs(float(dw.sum())) > settings.WEIGHT_SUM_TOL:
        raise InvalidInputError("weight update must leave the weight sum unchanged")
    moved = dw != 0
    if np.any(r[moved] <= 0):
        raise InvalidInputError("re-weighting needs positive reserves in moved assets")
    return float(v_prev * np.exp(np.sum(dw[moved] * np.log(r[moved]))))


@dataclass(frozen=True)
class ReweightTrajectory:
    times: FloatArray
    weights: FloatArray
    reserves: FloatArray
    v_values: FloatArray
    g_values: FloatArray

    def to_frame(self) -> pd.DataFrame:
        n = self.weights.shape[1]
        columns: dict[str, FloatArray] = {"time": self.times}
        columns |= {f"w_{i}": self.weights[:, i] for i in range(n)}
        columns |= {f"R_{i}": self.reserves[:, i] for i in range(n)}
        columns |= {"V": self.v_values, "G": self.g_values}
        return pd.DataFrame(columns)


def _is_reweight_step(k: int, steps: int, every: int, final: bool) -> bool:
    return k % every == 0 if k < steps else final


def simulate_reweighting_pool(
    pool0: PoolState,
    schedule: WeightSchedule,
    price_path: PricePath,
    reweight_every: int = 1,
    final_reweight: bool = True,
) -> ReweightTrajectory:
    """Step a pool through a price path, re-weighting at grid times.

    At each grid time the pool is first arbitraged to the prevailing prices
    under its current weights. At re-weighting times the new weights are then
    applied to the reserves held at that moment, ``V`` is updated, and the pool
    is arbitraged again under the new weights. Re-weighting happens at every
    ``reweight_every``-th step and, if ``final_reweight``, at the last grid time.
    """
    if pool0.n != schedule.n or pool0.n != price_path.n:
        raise InvalidInputError("pool, schedule and price path disagree on asset count")
    if reweight_every < 1:
        raise InvalidInputError("reweight_every must be at least 1")
    steps = price_path.grid.steps
    pool = pool0
    times = price_path.times
    weights = np.empty((steps + 1, pool0.n))
    reserves = np.empty((steps + 1, pool0.n))
    v_values = np.empty(steps + 1)
    g_values = np.empty(steps + 1)
    for k in range(steps + 1):
        prices = PriceVector(price_path.values[k])
        pool = arbitrage_rebalance(pool, prices).pool
        if _is_reweight_step(k, steps, reweight_every, final_reweight):
            w_new = schedule.at(times[k], prices)
            if not np.array_equal(w_new, pool.weights):
                v_new = discrete_v_update(
                    geometric_mean(pool), pool.reserves, pool.weights, w_new
                )
                # reserves in assets losing all weight are swept out by the next rebalance
                g_new = payoff_closed_form(v_new, w_new, prices)
                target = w_new * float(g_new) / prices.prices
                pool = PoolState(reserves=target, weights=w_new)
        weights[k] = pool.weights
        reserves[k] = pool.reserves
        v_values[k] = geometric_mean(pool)
        g_values[k] = pool_value(pool, prices)
    logger.debug("re-weighting pool: terminal value %.10g", g_values[-1])
    return ReweightTrajectory(
        times=times, weights=weights, reserves=reserves, v_values=v_values, g_values=g_values
    )


def discrete_payoff(
    v0: float,
    g0: float,
    schedule: WeightSchedule,
    price_path: PricePath,
    rel_tol: float = 1e-9,
) -> float:
    """Terminal LP payoff of a pool re-weighted at every grid time of the path.

    Each update multiplies ``V`` by ``prod((w_i(t_{k-1}) / S_i(t_k)) ** dw_i(t_k))``:
    the weights in force before the update and the prices at which the update
    happens, which are exactly the no-arbitrage reserves divided by ``G``.
    """
    if schedule.n != price_path.n:
        raise InvalidInputError(f"schedule has {schedule.n} assets, path has {price_path.n}")
    w = schedule.along(price_path)
    if np.any(w <= 0):
        raise InvalidInputError("discrete payoff needs strictly positive weights")
    s = price_path.values
    g_start = float(payoff_closed_form(v0, w[0], s[0]))
    if abs(g_start - g0) > rel_tol * g0:
        raise InvalidInputError(
            f"initial payoff {g0} is inconsistent with V={v0} (expected {g_start})"
        )
    dw = np.diff(w, axis=0)
    log_v = np.log(v0) + np.sum(dw * (np.log(w[:-1]) - np.log(s[1:])))
    return float(payoff_closed_form(np.exp(log_v), w[-1], s[-1]))


def continuous_value_path(
    g_t: float, schedule: WeightSchedule, price_path: PricePath, weights: FloatArray | None = None
) -> FloatArray:
    """``G`` at every grid time, accumulating ``w_i(t_k) * dlog S_i`` from the left."""
    w = schedule.along(price_path) if weights is None else weights
    log_steps = np.sum(w[:-1] * np.diff(np.log(price_path.values), axis=0), axis=1)
    return np.asarray(g_t * np.exp(np.concatenate([[0.0], np.cumsum(log_steps)])))


def continuous_payoff(
    g_t: float, schedule: WeightSchedule, price_path: PricePath
) -> float:
    return float(continuous_value_path(g_t, schedule, price_path)[-1])


def wgm_continuous(
    v_t: float, schedule: WeightSchedule, price_path: PricePath
) -> float:
    """Weighted geometric mean at the end of the path in the continuous limit."""
    w = schedule.along(price_path)
    s = price_path.values
    g_t = float(payoff_closed_form(v_t, w[0], s[0]))
    g_T = float(continuous_value_path(g_t, schedule, price_path, weights=w)[-1])
    # invert G = V * prod((S / w) ** w) at the terminal weights
    return g_T / float(payoff_closed_form(1.0, w[-1], s[-1]))
