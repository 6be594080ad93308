"""Pool state, trades and arbitrage for geometric mean market makers.

A pool holds reserves ``R`` with weights ``w`` and only accepts trades that keep
the weighted geometric mean ``V = prod(R_i ** w_i)`` fixed. Trade deltas are
signed from the pool's side: positive amounts are deposited by the trader.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from g3m.core.config import settings
from g3m.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


def as_vector(values: npt.ArrayLike, name: str) -> FloatArray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def validate_weights(weights: npt.ArrayLike, tol: float | None = None) -> FloatArray:
    w = as_vector(weights, "weights")
    tol = settings.WEIGHT_SUM_TOL if tol is None else tol
    if np.any(w < 0) or np.any(w > 1):
        raise InvalidInputError(f"weights must lie in [0, 1], got {w.tolist()}")
    if abs(float(np.sum(w)) - 1.0) > tol:
        raise InvalidInputError(f"weights must sum to 1, got {float(np.sum(w))!r}")
    return w


@dataclass(frozen=True)
class PriceVector:
    prices: FloatArray

    def __post_init__(self) -> None:
        prices = as_vector(self.prices, "prices")
        if np.any(prices <= 0):
            raise InvalidInputError("prices must be strictly positive")
        object.__setattr__(self, "prices", prices)

    @property
    def n(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class Trade:
    deltas: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "deltas", as_vector(self.deltas, "trade"))

    @property
    def n(self) -> int:
        return len(self.deltas)

    @classmethod
    def zero(cls, n: int) -> "Trade":
        return cls(np.zeros(n))


@dataclass(frozen=True)
class PoolState:
    reserves: FloatArray
    weights: FloatArray
    n: int = field(init=False)

    def __post_init__(self) -> None:
        reserves = as_vector(self.reserves, "reserves")
        weights = validate_weights(self.weights)
        if len(reserves) != len(weights):
            raise InvalidInputError(
                f"{len(reserves)} reserves but {len(weights)} weights"
            )
        if len(reserves) < 2:
            raise InvalidInputError("a pool needs at least two assets")
        held = weights > 0
        if np.any(reserves[held] <= 0):
            raise InvalidInputError("reserves of weighted assets must be positive")
        if np.any(reserves[~held] != 0):
            raise InvalidInputError(
                "zero-weight assets must hold no reserves (no-arbitrage target undefined)"
            )
        object.__setattr__(self, "reserves", reserves)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "n", len(reserves))


def _check_dim(pool: PoolState, n: int, what: str) -> None:
    if n != pool.n:
        raise InvalidInputError(f"{what} has {n} entries, pool has {pool.n} assets")


def _log_wgm(reserves: FloatArray, weights: FloatArray) -> float:
    held = weights > 0
    return float(np.sum(weights[held] * np.log(reserves[held])))


def geometric_mean(pool: PoolState) -> float:
    return float(np.exp(_log_wgm(pool.reserves, pool.weights)))


def is_feasible(pool: PoolState, trade: Trade, tol: float | None = None) -> bool:
    _check_dim(pool, trade.n, "trade")
    tol = settings.FEASIBILITY_TOL if tol is None else tol
    after = pool.reserves + trade.deltas
    held = pool.weights > 0
    if np.any(after[held] <= 0) or np.any(after[~held] != 0):
        return False
    v = geometric_mean(pool)
    v_after = float(np.exp(_log_wgm(after, pool.weights)))
    return abs(v_after - v) <= tol * v


def apply_trade(pool: PoolState, trade: Trade, tol: float | None = None) -> PoolState:
    _check_dim(pool, trade.n, "trade")
    after = pool.reserves + trade.deltas
    if np.any(after[pool.weights > 0] <= 0):
        raise InvalidInputError("trade leaves a non-positive reserve")
    if not is_feasible(pool, trade, tol):
        raise InvalidInputError("trade does not preserve the weighted geometric mean")
    return PoolState(reserves=after, weights=pool.weights)


def solve_pair_trade(
    pool: PoolState, deposit_index: int, amount: float, withdraw_index: int
) -> Trade:
    """Deposit ``amount`` of one asset and take out whatever keeps ``V`` fixed."""
    if deposit_index == withdraw_index:
        raise InvalidInputError("deposit and withdraw assets must differ")
    w_out = pool.weights[withdraw_index]
    if w_out <= 0:
        raise InvalidInputError("cannot solve the invariant for a zero-weight asset")
    after = pool.reserves.copy()
    after[deposit_index] += amount
    if after[deposit_index] <= 0:
        raise InvalidInputError("trade leaves a non-positive reserve")
    others = np.ones(pool.n, dtype=bool)
    others[withdraw_index] = False
    log_rest = _log_wgm(after[others], pool.weights[others])
    log_v = _log_wgm(pool.reserves, pool.weights)
    after[withdraw_index] = np.exp((log_v - log_rest) / w_out)
    return Trade(after - pool.reserves)


def spot_price(pool: PoolState, i: int, j: int) -> float:
    """Marginal price of asset ``i`` in units of asset ``j``."""
    if i == j:
        raise InvalidInputError("spot price needs two distinct assets")
    w_i, w_j = pool.weights[i], pool.weights[j]
    if w_i <= 0 or w_j <= 0:
        raise InvalidInputError("spot price is undefined for zero-weight assets")
    return float((pool.reserves[j] / w_j) / (pool.reserves[i] / w_i))


def pool_value(pool: PoolState, prices: PriceVector) -> float:
    _check_dim(pool, prices.n, "price vector")
    return float(np.dot(pool.reserves, prices.prices))


def payoff_closed_form(
    v: float | FloatArray, weights: npt.ArrayLike, prices: PriceVector | FloatArray
) -> float | FloatArray:
    """LP payoff ``V * prod((S_i / w_i) ** w_i)``.

    ``prices`` may be a batch with assets along the last axis, in which case the
    result has the batch shape. Zero-weight factors are taken as 1.
    """
    w = np.asarray(weights, dtype=np.float64)
    s = prices.prices if isinstance(prices, PriceVector) else np.asarray(prices)
    held = w > 0
    log_g = np.log(v) + np.sum(
        w[held] * (np.log(s[..., held]) - np.log(w[held])), axis=-1
    )
    g = np.exp(log_g)
    return float(g) if np.ndim(g) == 0 else g


def rebalance_reserves(
    v: float | FloatArray, weights: npt.ArrayLike, prices: FloatArray
) -> FloatArray:
    """No-arbitrage reserves ``w_i * G / S_i`` for one or many price vectors."""
    w = np.asarray(weights, dtype=np.float64)
    g = np.asarray(payoff_closed_form(v, w, prices))
    return w * g[..., None] / prices


class RebalanceResult(NamedTuple):
    pool: PoolState
    trade: Trade
    profit: float


def arbitrage_rebalance(pool: PoolState, prices: PriceVector) -> RebalanceResult:
    """Apply the profit-maximising arbitrage against external ``prices``.

    Zero-weight assets holding reserves are already refused by ``PoolState``,
    so every pool reaching here has a defined no-arbitrage target.
    """
    _check_dim(pool, prices.n, "price vector")
    v = geometric_mean(pool)
    target = rebalance_reserves(v, pool.weights, prices.prices)
    trade = Trade(target - pool.reserves)
    profit = -float(np.dot(prices.prices, trade.deltas))
    logger.debug("arbitrage rebalance: trade=%s profit=%.6g", trade.deltas, profit)
    return RebalanceResult(
        pool=PoolState(reserves=target, weights=pool.weights),
        trade=trade,
        profit=profit,
    )


def arbitrage_profit_of_trade(
    pool: PoolState, prices: PriceVector, trade: Trade, tol: float | None = None
) -> float:
    _check_dim(pool, prices.n, "price vector")
    if not is_feasible(pool, trade, tol):
        raise InvalidInputError("trade does not preserve the weighted geometric mean")
    return -float(np.dot(prices.prices, trade.deltas))


def impermanent_loss(pool: PoolState, prices: PriceVector) -> float:
    """Arbitraged LP value relative to holding the current reserves, minus one."""
    lp = payoff_closed_form(geometric_mean(pool), pool.weights, prices)
    return float(lp) / pool_value(pool, prices) - 1.0


def require_balanced(pool: PoolState, prices: PriceVector, rel_tol: float = 1e-9) -> None:
    """Refuse pools whose value allocation is not ``w_i * G`` at ``prices``."""
    _check_dim(pool, prices.n, "price vector")
    g = pool_value(pool, prices)
    held = pool.weights > 0
    allocation = pool.reserves[held] * prices.prices[held] / (pool.weights[held] * g)
    if np.any(np.abs(allocation - 1.0) > rel_tol):
        raise InvalidInputError("pool is not in no-arbitrage balance with the prices")
