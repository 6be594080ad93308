"""Risk-neutral correlated geometric Brownian motion.

Each asset follows ``dS_i = S_i (r dt + sigma_i dW_i)`` with
``d<W_i, W_j> = rho_ij dt``. Paths are sampled exactly in log space, one
counter-based Philox stream per path keyed by ``(seed, path_index)``, so a path
is the same whichever worker produces it.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.typing as npt
from numpy.linalg import LinAlgError
from scipy import linalg

from g3m.core.errors import InvalidInputError, NumericalError
from g3m.pool import FloatArray, PriceVector, as_vector, validate_weights

logger = logging.getLogger(__name__)

SEED_LIMIT = 2**64
# eigenvalues above -PSD_TOL count as zero when falling back from Cholesky
PSD_TOL = 1e-10


def factor_correlation(corr: npt.ArrayLike) -> FloatArray:
    """Return ``L`` with ``L @ L.T == corr``.

    Cholesky first; singular but positive semidefinite matrices (perfect
    correlation) fall back to ``Q sqrt(Lambda)`` from a symmetric eigensolver.
    """
    c = np.asarray(corr, dtype=np.float64)
    try:
        return np.asarray(linalg.cholesky(c, lower=True), dtype=np.float64)
    except LinAlgError:
        pass
    eigvals, eigvecs = linalg.eigh(c)
    if eigvals.min() < -PSD_TOL:
        raise NumericalError(
            f"correlation matrix is not positive semidefinite "
            f"(smallest eigenvalue {eigvals.min():.3g})"
        )
    logger.info("correlation matrix is singular, using eigen factorization")
    return np.asarray(eigvecs * np.sqrt(np.clip(eigvals, 0.0, None)), dtype=np.float64)


@dataclass(frozen=True)
class MarketParams:
    r: float
    sigma: FloatArray
    corr: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", as_vector(self.sigma, "sigma"))
        corr = np.array(self.corr, dtype=np.float64)
        corr.setflags(write=False)
        object.__setattr__(self, "corr", corr)
        validate(self)

    @classmethod
    def independent(cls, r: float, sigma: npt.ArrayLike) -> "MarketParams":
        s = as_vector(sigma, "sigma")
        return cls(r=r, sigma=s, corr=np.eye(len(s)))

    @classmethod
    def pair(
        cls, r: float, sigma_a: float, sigma_b: float, rho: float
    ) -> "MarketParams":
        return cls(
            r=r, sigma=np.array([sigma_a, sigma_b]), corr=np.array([[1.0, rho], [rho, 1.0]])
        )

    @property
    def n(self) -> int:
        return len(self.sigma)

    @cached_property
    def factor(self) -> FloatArray:
        return factor_correlation(self.corr)

    @cached_property
    def covariance(self) -> FloatArray:
        return np.asarray(self.corr * np.outer(self.sigma, self.sigma))


def validate(params: MarketParams) -> None:
    n = len(params.sigma)
    if not np.isfinite(params.r):
        raise InvalidInputError("r must be finite")
    if np.any(params.sigma <= 0):
        raise InvalidInputError("volatilities must be strictly positive")
    corr = params.corr
    if corr.shape != (n, n):
        raise InvalidInputError(f"correlation matrix must be {n}x{n}, got {corr.shape}")
    if not np.all(np.isfinite(corr)):
        raise InvalidInputError("correlation matrix must be finite")
    if np.any(np.diag(corr) != 1.0):
        raise InvalidInputError("correlation matrix must have a unit diagonal")
    if not np.array_equal(corr, corr.T):
        raise InvalidInputError("correlation matrix must be symmetric")
    if np.any(np.abs(corr) > 1.0):
        raise InvalidInputError("correlations must lie in [-1, 1]")
    # raises NumericalError when not PSD
    factor_correlation(corr)


@dataclass(frozen=True)
class PathGrid:
    t0: float
    T: float
    steps: int

    def __post_init__(self) -> None:
        if self.t0 < 0 or not self.T > self.t0:
            raise InvalidInputError(f"need T > t0 >= 0, got t0={self.t0}, T={self.T}")
        if self.steps < 1:
            raise InvalidInputError("a grid needs at least one step")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.steps

    @property
    def times(self) -> FloatArray:
        return np.linspace(self.t0, self.T, self.steps + 1)


@dataclass(frozen=True)
class PricePath:
    grid: PathGrid
    values: FloatArray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != self.grid.steps + 1:
            raise InvalidInputError(
                f"price path must have shape ({self.grid.steps + 1}, n), got {values.shape}"
            )
        if not np.all(values > 0):
            raise InvalidInputError("prices along a path must be strictly positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.shape[1])

    @property
    def times(self) -> FloatArray:
        return self.grid.times

    def initial(self) -> PriceVector:
        return PriceVector(self.values[0])

    def terminal(self) -> PriceVector:
        return PriceVector(self.values[-1])

    def every(self, m: int) -> "PricePath":
        """The same path observed on a grid ``m`` times coarser."""
        if m < 1 or self.grid.steps % m:
            raise InvalidInputError(f"{self.grid.steps} steps cannot be split every {m}")
        grid = PathGrid(self.grid.t0, self.grid.T, self.grid.steps // m)
        return PricePath(grid=grid, values=self.values[::m])


def _path_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, index], dtype=np.uint64))
    )


def simulate_batch(
    params: MarketParams,
    s0: PriceVector,
    grid: PathGrid,
    seed: int,
    start: int,
    stop: int,
    antithetic: bool = False,
) -> FloatArray:
    """Prices for paths ``start..stop-1`` as an array ``(paths, steps + 1, n)``.

    With ``antithetic`` paths ``2k`` and ``2k + 1`` share one Philox stream and
    use opposite shocks.
    """
    if not 0 <= seed < SEED_LIMIT:
        raise InvalidInputError("seed must be an unsigned 64-bit integer")
    if s0.n != params.n:
        raise InvalidInputError(f"{s0.n} initial prices for {params.n} assets")
    if not 0 <= start <= stop:
        raise InvalidInputError("invalid path range")
    h = grid.dt
    shocks = np.empty((stop - start, grid.steps, params.n))
    for row, p in enumerate(range(start, stop)):
        stream, sign = (p // 2, -1.0 if p % 2 else 1.0) if antithetic else (p, 1.0)
        draws = _path_generator(seed, stream).standard_normal((grid.steps, params.n))
        shocks[row] = sign * draws
    # fixed-order elementwise accumulation: a path's values do not depend on batch size
    correlated = np.zeros_like(shocks)
    for k in range(params.n):
        correlated += shocks[..., k : k + 1] * params.factor[:, k]
    drift = (params.r - 0.5 * params.sigma**2) * h
    log_steps = drift + params.sigma * np.sqrt(h) * correlated
    log_paths = np.concatenate(
        [np.zeros((stop - start, 1, params.n)), np.cumsum(log_steps, axis=1)], axis=1
    )
    return np.asarray(s0.prices * np.exp(log_paths))


def simulate_paths(
    params: MarketParams,
    s0: PriceVector,
    grid: PathGrid,
    seed: int,
    n_paths: int,
    antithetic: bool = False,
) -> list[PricePath]:
    batch = simulate_batch(params, s0, grid, seed, 0, n_paths, antithetic)
    return [PricePath(grid=grid, values=values) for values in batch]


def portfolio_volatility(weights: npt.ArrayLike, params: MarketParams) -> float:
    """Volatility of the weighted geometric mean of prices ``prod(S_i ** w_i)``."""
    w = validate_weights(weights)
    if len(w) != params.n:
        raise InvalidInputError(f"{len(w)} weights for {params.n} assets")
    return float(np.sqrt(max(float(w @ params.covariance @ w), 0.0)))


def ratio_volatility(params: MarketParams, a: int, b: int) -> float:
    """Volatility of the price ratio ``S_a / S_b``."""
    if a == b:
        raise InvalidInputError("ratio volatility needs two distinct assets")
    s_a, s_b = params.sigma[a], params.sigma[b]
    var = s_a**2 + s_b**2 - 2.0 * s_a * s_b * params.corr[a, b]
    return float(np.sqrt(max(var, 0.0)))
