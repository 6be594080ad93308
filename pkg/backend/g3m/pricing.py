"""Closed-form LP-share prices.

With constant weights the no-arbitrage price of an LP share is
``f = G_t * exp(eta)`` where ``eta <= 0`` (for non-negative correlations)
measures the volatility drag of the pool against a continuously rebalanced
constant-mix portfolio of the same weights.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import pandas as pd

from g3m.core.errors import InvalidInputError
from g3m.dynamic import WeightSchedule, require_deterministic
from g3m.market import MarketParams, portfolio_volatility, ratio_volatility
from g3m.pool import FloatArray, validate_weights

logger = logging.getLogger(__name__)


def _eta_rate(w: FloatArray, params: MarketParams) -> FloatArray:
    # 0.5 * (w' Sigma w - sum_i w_i sigma_i^2), one value per row of w
    quad = np.einsum("...i,ij,...j->...", w, params.covariance, w)
    return np.asarray(0.5 * (quad - w @ params.sigma**2))


def _checked(weights: npt.ArrayLike, params: MarketParams) -> FloatArray:
    w = validate_weights(weights)
    if len(w) != params.n:
        raise InvalidInputError(f"{len(w)} weights for {params.n} assets")
    return w


def eta_constant(weights: npt.ArrayLike, params: MarketParams, tau: float) -> float:
    if tau < 0:
        raise InvalidInputError("time to expiry must be non-negative")
    w = _checked(weights, params)
    sig2 = params.sigma**2
    cross = params.covariance * np.outer(w, w)
    np.fill_diagonal(cross, 0.0)
    return float(0.5 * (np.sum(sig2 * (w**2 - w)) + np.sum(cross)) * tau)


def eta_pairwise(weights: npt.ArrayLike, params: MarketParams, tau: float) -> float:
    """Same quantity as ``eta_constant`` written as a sum over asset pairs."""
    if tau < 0:
        raise InvalidInputError("time to expiry must be non-negative")
    w = _checked(weights, params)
    total = 0.0
    for i in range(params.n):
        for j in range(i + 1, params.n):
            total += ratio_volatility(params, i, j) ** 2 * w[i] * w[j]
    return -0.5 * tau * total


def eta_uniswap(sigma_a: float, sigma_b: float, rho: float, tau: float) -> float:
    if tau < 0:
        raise InvalidInputError("time to expiry must be non-negative")
    sigma_r = ratio_volatility(MarketParams.pair(0.0, sigma_a, sigma_b, rho), 0, 1)
    return -(sigma_r**2) * tau / 8.0


def lp_price_constant(g_t: float, eta: float) -> float:
    if g_t <= 0:
        raise InvalidInputError("payoff must be positive")
    return float(g_t * np.exp(eta))


def constant_mix_value(g_t: float, eta: float) -> float:
    """Value of the same-value constant-mix portfolio; the LP trades at ``e^eta`` of it."""
    return float(np.exp(-eta) * lp_price_constant(g_t, eta))


@dataclass(frozen=True)
class EtaReport:
    eta: float
    lp_price: float
    constant_mix_value: float
    horizon: float
    # volatility of prod(S_i ** w_i)
    wgm_volatility: float

    @property
    def lp_to_constant_mix(self) -> float:
        return self.lp_price / self.constant_mix_value


def eta_report(
    g_t: float, weights: npt.ArrayLike, params: MarketParams, tau: float
) -> EtaReport:
    eta = eta_constant(weights, params, tau)
    return EtaReport(
        eta=eta,
        lp_price=lp_price_constant(g_t, eta),
        constant_mix_value=constant_mix_value(g_t, eta),
        horizon=tau,
        wgm_volatility=portfolio_volatility(weights, params),
    )


def eta_time_varying(
    schedule: WeightSchedule,
    params: MarketParams,
    t: float,
    T: float,
    quad_steps: int = 1_000,
) -> float:
    """Composite midpoint rule for eta of a deterministic weight schedule on ``[t, T]``."""
    require_deterministic(schedule)
    if not T > t:
        raise InvalidInputError("need T > t")
    if quad_steps < 1:
        raise InvalidInputError("quadrature needs at least one panel")
    if schedule.n != params.n:
        raise InvalidInputError(f"schedule has {schedule.n} assets, market has {params.n}")
    h = (T - t) / quad_steps
    mids = t + (np.arange(quad_steps) + 0.5) * h
    return float(np.sum(_eta_rate(schedule.weights_at(mids), params)) * h)


def lp_greeks(f: float, w_i: float, s_i: float) -> tuple[float, float]:
    """Delta and gamma of an LP share in asset ``i`` at fixed ``V`` and other prices."""
    if s_i <= 0:
        raise InvalidInputError("price must be positive")
    return w_i * f / s_i, w_i * (w_i - 1.0) * f / s_i**2


def _check_grid(values: Sequence[float], lo: float, hi: float, name: str) -> None:
    if any(not lo <= v <= hi for v in values):
        raise InvalidInputError(f"{name} grid must lie in [{lo}, {hi}]")


def fig1_surface(
    sigma_a: float,
    sigma_b: float,
    rho_grid: Sequence[float],
    w_grid: Sequence[float],
    tau: float = 1.0,
) -> pd.DataFrame:
    """Eta of a two-asset pool over weights of the first asset, one block per correlation."""
    _check_grid(rho_grid, -1.0, 1.0, "correlation")
    _check_grid(w_grid, 0.0, 1.0, "weight")
    rows = []
    for rho in rho_grid:
        params = MarketParams.pair(0.0, sigma_a, sigma_b, rho)
        rows += [
            (w, rho, eta_constant([w, 1.0 - w], params, tau)) for w in w_grid
        ]
    return pd.DataFrame(rows, columns=["w", "rho_or_sigma", "eta"])


def fig1_sigma_surface(
    sigma_grid: Sequence[float],
    sigma_b: float,
    rho: float,
    w_grid: Sequence[float],
    tau: float = 1.0,
) -> pd.DataFrame:
    """Eta over weights of the first asset, one block per volatility of that asset."""
    _check_grid(w_grid, 0.0, 1.0, "weight")
    if any(s <= 0 for s in sigma_grid):
        raise InvalidInputError("volatility grid must be positive")
    rows = []
    for sigma_a in sigma_grid:
        params = MarketParams.pair(0.0, sigma_a, sigma_b, rho)
        rows += [
            (w, sigma_a, eta_constant([w, 1.0 - w], params, tau)) for w in w_grid
        ]
    return pd.DataFrame(rows, columns=["w", "rho_or_sigma", "eta"])
