"""Replicating derivative payoffs with a two-asset pool.

A pool holding a risky asset with weight ``w`` and the money market with
weight ``1 - w`` reproduces a claim ``g(x, t)`` when ``w`` is the claim's
elasticity ``x g_x / g``. That only works where the elasticity lies in
``[0, 1]``: a pool cannot short or lever its reserves.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.stats import norm

from g3m.core.config import settings
from g3m.core.errors import (
    InvalidInputError,
    NumericalError,
    ReplicabilityError,
    Violation,
)
from g3m.dynamic import (
    WeightSchedule,
    continuous_value_path,
    simulate_reweighting_pool,
)
from g3m.market import PricePath
from g3m.pool import FloatArray, PoolState

logger = logging.getLogger(__name__)

Real = float | FloatArray
PayoffFn = Callable[[Real, Real], Real]


def _out(v: npt.ArrayLike) -> Real:
    arr = np.asarray(v, dtype=np.float64)
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class BsParams:
    r: float
    sigma_alpha: float
    K: float
    T: float

    def __post_init__(self) -> None:
        if self.sigma_alpha <= 0:
            raise InvalidInputError("volatility must be positive")
        if self.K <= 0:
            raise InvalidInputError("strike must be positive")
        if self.T <= 0:
            raise InvalidInputError("expiry must be positive")


class _BsTerms(NamedTuple):
    live: FloatArray
    d1: FloatArray
    d2: FloatArray
    discount: FloatArray


def _bs_terms(x: Real, t: Real, p: BsParams) -> _BsTerms:
    tau = p.T - np.asarray(t, dtype=np.float64)
    if np.any(tau < 0):
        raise InvalidInputError("time is past expiry")
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs <= 0):
        raise InvalidInputError("price must be positive")
    live = tau > 0
    safe_tau = np.where(live, tau, 1.0)
    sd = p.sigma_alpha * np.sqrt(safe_tau)
    d1 = (np.log(xs / p.K) + (p.r + 0.5 * p.sigma_alpha**2) * safe_tau) / sd
    return _BsTerms(live, d1, d1 - sd, np.exp(-p.r * tau))


def _require_live(t: Real, p: BsParams) -> None:
    if np.any(np.asarray(t) >= p.T):
        raise InvalidInputError("replicating weights are defined only before expiry")


def bs_call_price(x: Real, t: Real, p: BsParams) -> Real:
    b = _bs_terms(x, t, p)
    live = x * norm.cdf(b.d1) - p.K * b.discount * norm.cdf(b.d2)
    return _out(np.where(b.live, live, np.maximum(np.asarray(x) - p.K, 0.0)))


def bs_put_price(x: Real, t: Real, p: BsParams) -> Real:
    b = _bs_terms(x, t, p)
    live = p.K * b.discount * norm.cdf(-b.d2) - x * norm.cdf(-b.d1)
    return _out(np.where(b.live, live, np.maximum(p.K - np.asarray(x), 0.0)))


def protective_put_weight(x: Real, t: Real, p: BsParams) -> Real:
    _require_live(t, p)
    b = _bs_terms(x, t, p)
    return _out(x * norm.cdf(b.d1) / (np.asarray(bs_put_price(x, t, p)) + x))


def covered_call_weight(x: Real, t: Real, p: BsParams) -> Real:
    _require_live(t, p)
    b = _bs_terms(x, t, p)
    # x - C = x Phi(-d1) + K e^{-r tau} Phi(d2), both terms non-negative
    stock = x * norm.cdf(-b.d1)
    cash = p.K * b.discount * norm.cdf(b.d2)
    if np.any(stock + cash <= 0):
        raise NumericalError("covered call value is not positive")
    return _out(stock / (stock + cash))


class PayoffKind(str, Enum):
    FORWARD = "forward"
    CALL = "call"
    PUT = "put"
    PROTECTIVE_PUT = "protective-put"
    COVERED_CALL = "covered-call"
    POWER = "power"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PayoffSpec:
    kind: PayoffKind
    value: PayoffFn
    dvalue: PayoffFn | None = None
    strike: float = 0.0
    expiry: float | None = None
    exponent: float | None = None

    def dvalue_dx(self, x: Real, t: Real) -> Real:
        if self.dvalue is not None:
            return self.dvalue(x, t)
        return numerical_derivative(self.value, x, t)

    @classmethod
    def forward(
        cls, strike: float = 0.0, r: float = 0.0, expiry: float | None = None
    ) -> "PayoffSpec":
        """Value of a long forward, ``x - K e^{-r (T - t)}``.

        ``K = 0`` is the asset itself, which never expires.
        """
        if strike < 0:
            raise InvalidInputError("strike must be non-negative")
        if strike == 0:
            expiry = None
        elif expiry is None:
            raise InvalidInputError("a forward with a strike needs an expiry")
        maturity = 0.0 if expiry is None else expiry

        def value(x: Real, t: Real) -> Real:
            return _out(x - strike * np.exp(-r * (maturity - np.asarray(t))))

        def dvalue(x: Real, t: Real) -> Real:
            return _out(np.ones(np.broadcast(x, t).shape))

        return cls(PayoffKind.FORWARD, value, dvalue, strike=strike, expiry=expiry)

    @classmethod
    def power(cls, exponent: float) -> "PayoffSpec":
        def value(x: Real, t: Real) -> Real:
            return _out(np.asarray(x, dtype=np.float64) ** exponent + 0 * np.asarray(t))

        def dvalue(x: Real, t: Real) -> Real:
            xs = np.asarray(x, dtype=np.float64)
            return _out(exponent * xs ** (exponent - 1.0) + 0 * np.asarray(t))

        return cls(PayoffKind.POWER, value, dvalue, exponent=exponent)

    @classmethod
    def constant(cls, c: float) -> "PayoffSpec":
        def value(x: Real, t: Real) -> Real:
            return _out(np.full(np.broadcast(x, t).shape, c))

        def dvalue(x: Real, t: Real) -> Real:
            return _out(np.zeros(np.broadcast(x, t).shape))

        return cls(PayoffKind.CUSTOM, value, dvalue)

    @classmethod
    def custom(cls, value: PayoffFn, dvalue: PayoffFn | None = None) -> "PayoffSpec":
        return cls(PayoffKind.CUSTOM, value, dvalue)

    @classmethod
    def call(cls, p: BsParams) -> "PayoffSpec":
        def dvalue(x: Real, t: Real) -> Real:
            b = _bs_terms(x, t, p)
            return _out(np.where(b.live, norm.cdf(b.d1), np.asarray(x) > p.K))

        return cls(
            PayoffKind.CALL,
            lambda x, t: bs_call_price(x, t, p),
            dvalue,
            strike=p.K,
            expiry=p.T,
        )

    @classmethod
    def put(cls, p: BsParams) -> "PayoffSpec":
        def dvalue(x: Real, t: Real) -> Real:
            b = _bs_terms(x, t, p)
            expired = -(np.asarray(x) < p.K).astype(np.float64)
            return _out(np.where(b.live, -norm.cdf(-b.d1), expired))

        return cls(
            PayoffKind.PUT,
            lambda x, t: bs_put_price(x, t, p),
            dvalue,
            strike=p.K,
            expiry=p.T,
        )

    @classmethod
    def protective_put(cls, p: BsParams) -> "PayoffSpec":
        def value(x: Real, t: Real) -> Real:
            return _out(x + np.asarray(bs_put_price(x, t, p)))

        def dvalue(x: Real, t: Real) -> Real:
            b = _bs_terms(x, t, p)
            return _out(np.where(b.live, norm.cdf(b.d1), np.asarray(x) > p.K))

        return cls(PayoffKind.PROTECTIVE_PUT, value, dvalue, strike=p.K, expiry=p.T)

    @classmethod
    def covered_call(cls, p: BsParams) -> "PayoffSpec":
        def value(x: Real, t: Real) -> Real:
            return _out(x - np.asarray(bs_call_price(x, t, p)))

        def dvalue(x: Real, t: Real) -> Real:
            b = _bs_terms(x, t, p)
            return _out(np.where(b.live, norm.cdf(-b.d1), np.asarray(x) < p.K))

        return cls(PayoffKind.COVERED_CALL, value, dvalue, strike=p.K, expiry=p.T)


def numerical_derivative(value: PayoffFn, x: Real, t: Real) -> Real:
    """Centred difference with relative step; refuses points where the slope jumps."""
    xs = np.asarray(x, dtype=np.float64)
    h = settings.ELASTICITY_REL_STEP * xs
    g0 = np.asarray(value(xs, t))
    up = np.asarray(value(xs + h, t))
    down = np.asarray(value(xs - h, t))
    forward, backward = (up - g0) / h, (g0 - down) / h
    scale = np.maximum.reduce([np.abs(forward), np.abs(backward), np.abs(g0) / xs])
    if np.any(np.abs(forward - backward) > settings.KINK_TOL * scale):
        raise NumericalError("payoff is not differentiable at the evaluation point")
    return _out((up - down) / (2.0 * h))


def elasticity_weight(spec: PayoffSpec, x: Real, t: Real) -> Real:
    g = np.asarray(spec.value(x, t))
    if np.any(g <= 0):
        raise NumericalError("payoff must be positive to derive a weight")
    return _out(np.asarray(x) * np.asarray(spec.dvalue_dx(x, t)) / g)


def check_replicable(
    spec: PayoffSpec,
    x_grid: Sequence[float],
    t_grid: Sequence[float],
    tol: float | None = None,
) -> list[Violation]:
    tol = settings.WEIGHT_RANGE_TOL if tol is None else tol
    xs = np.asarray(x_grid, dtype=np.float64)
    violations = []
    for t in t_grid:
        w = np.atleast_1d(np.asarray(elasticity_weight(spec, xs, t)))
        bad = (w < -tol) | (w > 1.0 + tol)
        violations += [Violation(float(x), float(t), float(v)) for x, v in zip(xs[bad], w[bad])]
    return violations


@dataclass(frozen=True)
class Offset:
    description: str
    value: PayoffFn


class OptionDecomposition(NamedTuple):
    lp_spec: PayoffSpec
    offset: Offset


def naked_option_offsets(kind: PayoffKind, p: BsParams) -> OptionDecomposition:
    """Split a naked option into a replicable LP claim minus a plain offset position."""
    if kind is PayoffKind.PUT:
        return OptionDecomposition(
            lp_spec=PayoffSpec.protective_put(p),
            offset=Offset(
                description="short one unit of the risky asset",
                value=lambda x, t: _out(np.asarray(x, dtype=np.float64) + 0 * np.asarray(t)),
            ),
        )
    if kind is not PayoffKind.CALL:
        raise InvalidInputError(f"no offset construction for {kind.value}")

    def cash(x: Real, t: Real) -> Real:
        # discounted so the position accretes to K at expiry
        return _out(p.K * np.exp(-p.r * (p.T - np.asarray(t))) + 0 * np.asarray(x))

    def value(x: Real, t: Real) -> Real:
        return _out(np.asarray(bs_call_price(x, t, p)) + np.asarray(cash(x, t)))

    lp_spec = PayoffSpec(
        PayoffKind.CUSTOM,
        value,
        PayoffSpec.call(p).dvalue,
        strike=p.K,
        expiry=p.T,
    )
    return OptionDecomposition(
        lp_spec=lp_spec,
        offset=Offset(description="short money-market position worth K e^{-r(T-t)}", value=cash),
    )


def derivative_reserve_weight(
    g_spec: PayoffSpec, z_spec: PayoffSpec, x: Real, t: Real = 0.0
) -> Real:
    """Weight on a reserve asset that is itself a claim ``z(x)`` so the pool tracks ``g(x)``."""
    z = np.asarray(z_spec.value(x, t))
    z_x = np.asarray(z_spec.dvalue_dx(x, t))
    if np.any(z <= 0):
        raise NumericalError("reserve claim value must be positive")
    if np.any(z_x == 0):
        raise NumericalError("reserve claim has zero elasticity")
    reserve_elasticity = np.asarray(x) * z_x / z
    return _out(np.asarray(elasticity_weight(g_spec, x, t)) / reserve_elasticity)


@dataclass(frozen=True)
class ReplicationReport:
    weight_path: FloatArray
    lp_values: FloatArray
    target_values: FloatArray
    max_abs_tracking_error: float
    signed_terminal_gap: float

    @property
    def error_scale(self) -> FloatArray:
        """Denominator of the relative errors; options expiring worthless have ``g = 0``."""
        floor = settings.REL_ERROR_FLOOR * abs(float(self.target_values[0]))
        return np.maximum(np.abs(self.target_values), floor)

    @property
    def max_rel_tracking_error(self) -> float:
        return float(np.max(np.abs(self.lp_values - self.target_values) / self.error_scale))

    @property
    def rel_terminal_gap(self) -> float:
        return self.signed_terminal_gap / float(self.error_scale[-1])


def replicate_along_path(
    spec: PayoffSpec,
    p: BsParams | None,
    price_path: PricePath,
    reweight_every: int = 1,
    clamp: bool = False,
    leakage: bool = False,
    r: float | None = None,
) -> ReplicationReport:
    """Track ``g(S(t), t)`` with a risky-asset / money-market pool along one path.

    Weights are the claim's elasticity at every ``reweight_every``-th grid time
    before expiry and are held in between. The pool value accumulates
    ``w dlog S + (1 - w) r dt``; with ``leakage`` the pool is instead stepped
    through arbitrage at every weight change, which loses value at each jump.
    ``r`` sets the money-market rate for claims without option parameters.
    """
    if price_path.n != 1:
        raise InvalidInputError("replication runs on a single risky-asset path")
    if reweight_every < 1:
        raise InvalidInputError("reweight_every must be at least 1")
    if spec.expiry is not None and price_path.grid.T > spec.expiry + 1e-12:
        raise InvalidInputError("price path runs past the claim's expiry")
    if r is None:
        r = p.r if p is not None else 0.0
    elif p is not None and r != p.r:
        raise InvalidInputError("rate disagrees with the option parameters")
    times = price_path.times
    s = price_path.values[:, 0]
    steps = price_path.grid.steps

    knots = np.arange(0, steps, reweight_every)
    w_knots = np.atleast_1d(np.asarray(elasticity_weight(spec, s[knots], times[knots])))
    tol = settings.WEIGHT_RANGE_TOL
    bad = (w_knots < -tol) | (w_knots > 1.0 + tol)
    if np.any(bad):
        violations = [
            Violation(float(s[k]), float(times[k]), float(w))
            for k, w in zip(knots[bad], w_knots[bad])
        ]
        if not clamp:
            raise ReplicabilityError(
                f"replicating weight left [0, 1] at {len(violations)} re-weighting times",
                violations,
            )
        logger.warning("clamping %d replicating weights into [0, 1]", len(violations))
    w_knots = np.clip(w_knots, 0.0, 1.0)

    # the state-dependent weights realised on this path, held between knots
    schedule = WeightSchedule.table(
        times[knots], np.column_stack([w_knots, 1.0 - w_knots])
    )
    two_asset = PricePath(
        grid=price_path.grid, values=np.column_stack([s, np.exp(r * times)])
    )
    weights = schedule.along(two_asset)
    g = np.asarray(spec.value(s, times), dtype=np.float64)
    if leakage:
        g0 = float(g[0])
        pool0 = PoolState(
            reserves=weights[0] * g0 / two_asset.values[0], weights=weights[0]
        )
        lp = simulate_reweighting_pool(
            pool0, schedule, two_asset, final_reweight=False
        ).g_values
    else:
        lp = continuous_value_path(float(g[0]), schedule, two_asset, weights=weights)

    gap = lp - g
    return ReplicationReport(
        weight_path=weights[:, 0],
        lp_values=lp,
        target_values=g,
        max_abs_tracking_error=float(np.max(np.abs(gap))),
        signed_terminal_gap=float(gap[-1]),
    )


def fig2_weights(
    K: float = 100.0,
    sigma: float = 0.2,
    r: float = 0.0,
    x_grid: Sequence[float] = (),
    tau_grid: Sequence[float] = (),
) -> pd.DataFrame:
    """Protective-put replicating weight over price and time to expiry."""
    rows = []
    for tau in tau_grid:
        p = BsParams(r=r, sigma_alpha=sigma, K=K, T=tau)
        w = np.atleast_1d(np.asarray(protective_put_weight(np.asarray(x_grid), 0.0, p)))
        rows += [(float(x), tau, float(v)) for x, v in zip(x_grid, w)]
    return pd.DataFrame(rows, columns=["x", "tau", "w"])
