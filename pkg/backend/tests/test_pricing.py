import math

import numpy as np
import pytest

from g3m.core.errors import InvalidInputError
from g3m.dynamic import WeightSchedule
from g3m.market import MarketParams
from g3m.pool import PriceVector, payoff_closed_form
from g3m.pricing import (
    constant_mix_value,
    eta_constant,
    eta_pairwise,
    eta_report,
    eta_time_varying,
    eta_uniswap,
    fig1_sigma_surface,
    fig1_surface,
    lp_greeks,
    lp_price_constant,
)
from tests.utils.utils import random_params, random_weights

FIG1 = MarketParams.pair(0.0, 0.3, 0.2, 0.0)


def test_eta_half_weights() -> None:
    assert eta_constant([0.5, 0.5], FIG1, 1.0) == pytest.approx(-0.01625, abs=1e-12)
    assert eta_uniswap(0.3, 0.2, 0.0, 1.0) == pytest.approx(-0.01625, abs=1e-12)


def test_eta_single_asset_exposure() -> None:
    assert eta_constant([1.0, 0.0], FIG1, 1.0) == 0.0
    assert eta_constant([0.0, 1.0], FIG1, 3.0) == 0.0


def test_eta_zero_horizon() -> None:
    assert eta_constant([0.3, 0.7], FIG1, 0.0) == 0.0
    with pytest.raises(InvalidInputError):
        eta_constant([0.3, 0.7], FIG1, -1.0)


def test_eta_weight_mismatch() -> None:
    with pytest.raises(InvalidInputError):
        eta_constant([0.2, 0.3, 0.5], FIG1, 1.0)
    with pytest.raises(InvalidInputError):
        eta_constant([0.2, 0.3], FIG1, 1.0)


def test_eta_pairwise_identity(rng: np.random.Generator) -> None:
    for _ in range(10_000):
        n = int(rng.integers(2, 7))
        params = random_params(rng, n)
        w = random_weights(rng, n)
        tau = float(rng.uniform(0.0, 2.0))
        assert eta_constant(w, params, tau) == pytest.approx(
            eta_pairwise(w, params, tau), abs=1e-13
        )


def test_eta_nonpositive_for_nonnegative_correlation(rng: np.random.Generator) -> None:
    for _ in range(10_000):
        n = int(rng.integers(2, 7))
        params = random_params(rng, n, nonnegative=True)
        w = random_weights(rng, n)
        assert eta_constant(w, params, float(rng.uniform(0.0, 2.0))) <= 1e-15


def test_eta_uniswap_matches_equal_weights(rng: np.random.Generator) -> None:
    for _ in range(1_000):
        sa, sb = rng.uniform(0.01, 1.0, 2)
        rho = float(rng.uniform(-1.0, 1.0))
        tau = float(rng.uniform(0.0, 3.0))
        params = MarketParams.pair(0.0, float(sa), float(sb), rho)
        assert eta_uniswap(float(sa), float(sb), rho, tau) == pytest.approx(
            eta_constant([0.5, 0.5], params, tau), rel=1e-13, abs=1e-15
        )


def test_lp_price_constant() -> None:
    assert lp_price_constant(18.899, -0.01625) == pytest.approx(18.594, abs=1e-3)
    assert lp_price_constant(5.0, 0.0) == 5.0
    with pytest.raises(InvalidInputError):
        lp_price_constant(0.0, -0.1)


def test_eta_report() -> None:
    report = eta_report(18.899, [0.5, 0.5], FIG1, 1.0)
    assert report.eta == pytest.approx(-0.01625)
    assert report.lp_to_constant_mix == pytest.approx(math.exp(-0.01625), rel=1e-14)
    assert report.constant_mix_value == pytest.approx(18.899, rel=1e-14)
    assert constant_mix_value(18.899, report.eta) == report.constant_mix_value
    assert report.wgm_volatility == pytest.approx(math.sqrt(0.13) / 2, rel=1e-14)


def test_eta_time_varying_constant_schedule() -> None:
    params = MarketParams.pair(0.0, 0.4, 0.25, 0.3)
    schedule = WeightSchedule.constant([0.35, 0.65])
    assert eta_time_varying(schedule, params, 0.0, 2.0) == pytest.approx(
        eta_constant([0.35, 0.65], params, 2.0), rel=1e-12
    )


def test_eta_time_varying_linear_schedule() -> None:
    schedule = WeightSchedule.linear([0.2, 0.8], [0.8, 0.2], 0.0, 1.0)
    # -0.5 * sigma_r^2 * integral of w (1 - w) with w going 0.2 -> 0.8
    expected = -0.5 * 0.13 * 0.22
    assert eta_time_varying(schedule, FIG1, 0.0, 1.0) == pytest.approx(expected, rel=1e-6)


def test_eta_time_varying_rejects_state_schedule() -> None:
    schedule = WeightSchedule.state_dependent(
        lambda t, s: np.tile([0.5, 0.5], (len(t), 1)), 2
    )
    with pytest.raises(InvalidInputError):
        eta_time_varying(schedule, FIG1, 0.0, 1.0)


def test_lp_greeks() -> None:
    v, w = 10.0, np.array([1 / 3, 2 / 3])

    def f(s0: float) -> float:
        return float(payoff_closed_form(v, w, PriceVector(np.array([s0, 1.5]))))

    def second_difference(h: float) -> float:
        return (f(s0 + h) - 2 * f(s0) + f(s0 - h)) / h**2

    s0 = 1.2
    h = 1e-5 * s0
    delta, gamma = lp_greeks(f(s0), w[0], s0)
    assert delta == pytest.approx((f(s0 + h) - f(s0 - h)) / (2 * h), rel=1e-6)
    # Richardson step on the second difference; a 1e-5 step drowns it in rounding
    coarse, fine = second_difference(2e-3), second_difference(1e-3)
    assert gamma == pytest.approx((4 * fine - coarse) / 3, rel=1e-6)
    assert gamma < 0


def test_lp_gamma_is_lowest_at_half_weight() -> None:
    f, s = 18.9, 1.5
    grid = np.linspace(0.0, 1.0, 101)
    gammas = [lp_greeks(f, float(w), s)[1] for w in grid]
    assert grid[int(np.argmin(gammas))] == 0.5
    assert min(gammas) == pytest.approx(-f / (4 * s**2), rel=1e-14)
    assert lp_greeks(f, 1.0, s) == (f / s, 0.0)


def test_fig1_surface() -> None:
    rho_grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    w_grid = list(np.linspace(0.0, 1.0, 11))
    frame = fig1_surface(0.3, 0.2, rho_grid, w_grid)
    assert list(frame.columns) == ["w", "rho_or_sigma", "eta"]
    assert len(frame) == len(rho_grid) * len(w_grid)
    edges = frame[frame["w"].isin([0.0, 1.0])]
    assert (edges["eta"] == 0.0).all()
    by_rho = frame.pivot(index="w", columns="rho_or_sigma", values="eta")
    assert (by_rho.diff(axis=1).iloc[:, 1:] >= 0).all().all()
    half = frame[(frame["w"] == 0.5) & (frame["rho_or_sigma"] == 0.0)]
    assert half["eta"].iloc[0] == pytest.approx(-0.01625, abs=1e-12)


def test_fig1_surface_rejects_bad_grid() -> None:
    with pytest.raises(InvalidInputError):
        fig1_surface(0.3, 0.2, [1.5], [0.5])
    with pytest.raises(InvalidInputError):
        fig1_surface(0.3, 0.2, [0.0], [1.5])


def test_fig1_sigma_surface() -> None:
    frame = fig1_sigma_surface([0.1, 0.3, 0.5], 0.2, 0.0, [0.0, 0.5, 1.0])
    assert len(frame) == 9
    half = frame[frame["w"] == 0.5].sort_values("rho_or_sigma")
    # more volatility on the first asset, more drag
    assert half["eta"].is_monotonic_decreasing
