import numpy as np

from g3m.market import MarketParams, PathGrid, PricePath, simulate_paths
from g3m.pool import FloatArray, PoolState, PriceVector


def random_weights(rng: np.random.Generator, n: int) -> FloatArray:
    return rng.dirichlet(np.ones(n))


def random_corr(
    rng: np.random.Generator, n: int, nonnegative: bool = False
) -> FloatArray:
    """Random correlation matrix from a random factor model."""
    k = int(rng.integers(1, n + 1))
    a = rng.uniform(0.0, 1.0, (n, k)) if nonnegative else rng.normal(size=(n, k))
    a += 1e-3
    cov = a @ a.T
    d = np.sqrt(np.diag(cov))
    corr = cov / np.outer(d, d)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def random_params(
    rng: np.random.Generator, n: int, nonnegative: bool = False, r: float = 0.0
) -> MarketParams:
    return MarketParams(
        r=r,
        sigma=rng.uniform(0.05, 0.8, n),
        corr=random_corr(rng, n, nonnegative),
    )


def random_pool(rng: np.random.Generator, n: int) -> PoolState:
    return PoolState(
        reserves=rng.uniform(0.5, 50.0, n), weights=random_weights(rng, n)
    )


def random_prices(rng: np.random.Generator, n: int) -> PriceVector:
    return PriceVector(rng.uniform(0.2, 5.0, n))


def random_path(
    rng: np.random.Generator, params: MarketParams, steps: int, T: float = 1.0
) -> PricePath:
    seed = int(rng.integers(0, 2**63))
    s0 = PriceVector(np.ones(params.n))
    return simulate_paths(params, s0, PathGrid(0.0, T, steps), seed, 1)[0]
