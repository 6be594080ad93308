import math

import numpy as np
import pytest

from g3m.core.errors import InvalidInputError
from g3m.dynamic import (
    ScheduleKind,
    WeightSchedule,
    continuous_payoff,
    continuous_value_path,
    discrete_payoff,
    discrete_v_update,
    reweight_loss,
    simulate_reweighting_pool,
    wgm_continuous,
)
from g3m.market import MarketParams, PathGrid, PricePath
from g3m.pool import (
    FloatArray,
    PoolState,
    PriceVector,
    arbitrage_rebalance,
    geometric_mean,
    payoff_closed_form,
    pool_value,
    rebalance_reserves,
)
from tests.utils.utils import random_params, random_path, random_weights


def balanced_pool(weights: FloatArray, prices: FloatArray, g0: float = 100.0) -> PoolState:
    return PoolState(reserves=weights * g0 / prices, weights=weights)


def test_discrete_v_update() -> None:
    reserves = np.array([11.0, 9.5346])
    v_new = discrete_v_update(10.0, reserves, [1 / 3, 2 / 3], [0.5, 0.5])
    assert v_new == pytest.approx(10.241, abs=1e-3)
    assert v_new == pytest.approx(math.sqrt(11.0 * 9.5346), rel=1e-4)
    assert discrete_v_update(10.0, reserves, [0.5, 0.5], [0.5, 0.5]) == 10.0


def test_discrete_v_update_rejects_bad_update() -> None:
    with pytest.raises(InvalidInputError):
        discrete_v_update(10.0, [1.0, 2.0], [0.5, 0.5], [0.6, 0.5])
    with pytest.raises(InvalidInputError):
        discrete_v_update(10.0, [0.0, 2.0], [0.5, 0.5], [0.4, 0.6])


def test_reweight_loss() -> None:
    assert reweight_loss([0.5, 0.5], [0.5, 0.5]) == 1.0
    expected = math.exp(-(0.3 * math.log(0.6) + 0.7 * math.log(1.4)))
    assert reweight_loss([0.5, 0.5], [0.3, 0.7]) == pytest.approx(expected, rel=1e-14)
    assert reweight_loss([0.5, 0.5], [0.3, 0.7]) < 1.0
    assert reweight_loss([1.0, 0.0], [0.5, 0.5]) == 0.0
    assert reweight_loss([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)


def test_weight_schedule_constant() -> None:
    schedule = WeightSchedule.constant([0.25, 0.75])
    assert schedule.kind is ScheduleKind.DETERMINISTIC
    np.testing.assert_array_equal(schedule.weights_at([0.0, 3.0]), [[0.25, 0.75]] * 2)


def test_weight_schedule_linear() -> None:
    schedule = WeightSchedule.linear([0.2, 0.8], [0.8, 0.2], 1.0, 2.0)
    w = schedule.weights_at([0.0, 1.5, 5.0])
    np.testing.assert_allclose(w, [[0.2, 0.8], [0.5, 0.5], [0.8, 0.2]], atol=1e-15)
    with pytest.raises(InvalidInputError):
        WeightSchedule.linear([0.2, 0.8], [0.8, 0.2], 1.0, 1.0)


def test_weight_schedule_table() -> None:
    schedule = WeightSchedule.table([0.0, 0.5], [[0.1, 0.9], [0.6, 0.4]])
    assert schedule.kind is ScheduleKind.TABLE
    w = schedule.weights_at([0.0, 0.49, 0.5, 2.0])
    np.testing.assert_array_equal(w[:, 0], [0.1, 0.1, 0.6, 0.6])
    with pytest.raises(InvalidInputError):
        WeightSchedule.table([0.5, 0.0], [[0.1, 0.9], [0.6, 0.4]])


def test_weight_schedule_rejects_invalid_weights() -> None:
    bad = WeightSchedule.state_dependent(lambda t, s: np.tile([0.6, 0.6], (len(t), 1)), 2)
    with pytest.raises(InvalidInputError):
        bad.at(0.0, PriceVector(np.array([1.0, 1.0])))
    negative = WeightSchedule.table([0.0], [[1.2, -0.2]])
    with pytest.raises(InvalidInputError):
        negative.at(0.0)


def test_state_schedule_needs_prices() -> None:
    schedule = WeightSchedule.state_dependent(
        lambda t, s: np.column_stack([s[:, 0] / s.sum(axis=1), s[:, 1] / s.sum(axis=1)]), 2
    )
    assert not schedule.is_deterministic
    np.testing.assert_allclose(schedule.at(0.0, PriceVector(np.array([1.0, 3.0]))), [0.25, 0.75])
    with pytest.raises(InvalidInputError):
        schedule.at(0.0)


def test_simulate_constant_weights_keeps_v() -> None:
    grid = PathGrid(0.0, 1.0, 2)
    path = PricePath(grid=grid, values=np.array([[1.0, 1.0], [1.3, 0.9], [0.8, 1.4]]))
    pool = arbitrage_rebalance(
        PoolState(reserves=np.array([10.0, 10.0]), weights=np.array([1 / 3, 2 / 3])),
        path.initial(),
    ).pool
    trajectory = simulate_reweighting_pool(pool, WeightSchedule.constant([1 / 3, 2 / 3]), path)
    np.testing.assert_allclose(trajectory.v_values, 10.0, rtol=1e-12)
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["time", "w_0", "w_1", "R_0", "R_1", "V", "G"]
    assert len(frame) == 3


def test_single_jump_loses_kl_factor() -> None:
    grid = PathGrid(0.0, 1.0, 1)
    path = PricePath(grid=grid, values=np.array([[2.0, 1.0], [2.0, 1.0]]))
    w_old, w_new = np.array([0.5, 0.5]), np.array([0.2, 0.8])
    schedule = WeightSchedule.table([0.0, 1.0], [w_old, w_new])
    trajectory = simulate_reweighting_pool(balanced_pool(w_old, path.values[0]), schedule, path)
    ratio = trajectory.g_values[1] / trajectory.g_values[0]
    assert ratio == pytest.approx(reweight_loss(w_old, w_new), rel=1e-12)
    np.testing.assert_array_equal(trajectory.weights[1], w_new)


def test_reweight_every_and_final_flag(rng: np.random.Generator) -> None:
    params = MarketParams.pair(0.0, 0.3, 0.2, 0.2)
    path = random_path(rng, params, 6)
    schedule = WeightSchedule.linear([0.2, 0.8], [0.8, 0.2], 0.0, 1.0)
    pool = balanced_pool(np.array([0.2, 0.8]), path.values[0])
    trajectory = simulate_reweighting_pool(
        pool, schedule, path, reweight_every=4, final_reweight=False
    )
    w = trajectory.weights[:, 0]
    np.testing.assert_allclose(w[:4], 0.2)
    np.testing.assert_allclose(w[4:], schedule.at(path.times[4])[0])
    final = simulate_reweighting_pool(pool, schedule, path, reweight_every=4)
    assert final.weights[-1, 0] == pytest.approx(0.8)


def test_discrete_payoff_constant_schedule(rng: np.random.Generator) -> None:
    params = MarketParams.pair(0.0, 0.3, 0.2, 0.0)
    path = random_path(rng, params, 10)
    w = np.array([0.4, 0.6])
    pool = balanced_pool(w, path.values[0])
    g = discrete_payoff(
        geometric_mean(pool), pool_value(pool, path.initial()), WeightSchedule.constant(w), path
    )
    reserves = rebalance_reserves(geometric_mean(pool), w, path.values[-1])
    assert g == pytest.approx(float(reserves @ path.values[-1]), rel=1e-12)


def test_discrete_payoff_rejects_inconsistent_start(rng: np.random.Generator) -> None:
    params = MarketParams.pair(0.0, 0.3, 0.2, 0.0)
    path = random_path(rng, params, 4)
    schedule = WeightSchedule.constant([0.4, 0.6])
    with pytest.raises(InvalidInputError):
        discrete_payoff(10.0, 1.0, schedule, path)
    with pytest.raises(InvalidInputError):
        discrete_payoff(10.0, 10.0, WeightSchedule.constant([1.0, 0.0]), path)


def test_discrete_payoff_matches_pool_oracle(rng: np.random.Generator) -> None:
    for _ in range(100):
        n = int(rng.integers(2, 5))
        steps = int(rng.integers(1, 51))
        params = random_params(rng, n)
        path = random_path(rng, params, steps)
        table = np.stack([random_weights(rng, n) for _ in range(steps + 1)])
        table = np.clip(table, 0.02, None)
        table /= table.sum(axis=1, keepdims=True)
        schedule = WeightSchedule.table(path.times, table)
        pool = balanced_pool(schedule.at(0.0), path.values[0], float(rng.uniform(1.0, 100.0)))
        oracle = simulate_reweighting_pool(pool, schedule, path).g_values[-1]
        closed = discrete_payoff(
            geometric_mean(pool), pool_value(pool, path.initial()), schedule, path
        )
        assert closed == pytest.approx(oracle, rel=1e-9)


def test_discrete_payoff_converges_to_continuous(rng: np.random.Generator) -> None:
    converging = 0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        params = random_params(rng, n)
        fine = random_path(rng, params, 512)
        start = np.clip(random_weights(rng, n), 0.05, None)
        end = np.clip(random_weights(rng, n), 0.05, None)
        schedule = WeightSchedule.linear(start / start.sum(), end / end.sum(), 0.0, 1.0)
        w0 = schedule.at(0.0)
        gaps = []
        for m in (32, 16, 8, 4, 2):
            path = fine.every(m)
            pool = balanced_pool(w0, path.values[0])
            g0 = pool_value(pool, path.initial())
            discrete = discrete_payoff(geometric_mean(pool), g0, schedule, path)
            gaps.append(abs(discrete - continuous_payoff(g0, schedule, path)))
        converging += all(a > b for a, b in zip(gaps, gaps[1:]))
    assert converging >= 95


def test_continuous_value_path(rng: np.random.Generator) -> None:
    params = MarketParams.pair(0.0, 0.3, 0.2, 0.5)
    path = random_path(rng, params, 20)
    schedule = WeightSchedule.linear([0.3, 0.7], [0.6, 0.4], 0.0, 1.0)
    values = continuous_value_path(5.0, schedule, path)
    assert values.shape == (21,)
    assert values[0] == 5.0
    assert values[-1] == pytest.approx(continuous_payoff(5.0, schedule, path), rel=1e-14)


def test_wgm_continuous_constant_weights(rng: np.random.Generator) -> None:
    params = MarketParams.pair(0.0, 0.3, 0.2, 0.5)
    path = random_path(rng, params, 20)
    schedule = WeightSchedule.constant([0.3, 0.7])
    assert wgm_continuous(4.0, schedule, path) == pytest.approx(4.0, rel=1e-12)


def test_dimension_mismatch() -> None:
    grid = PathGrid(0.0, 1.0, 1)
    path = PricePath(grid=grid, values=np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        discrete_payoff(1.0, 1.0, WeightSchedule.constant([0.5, 0.5]), path)


def test_wgm_continuous_consistent_with_payoff(rng: np.random.Generator) -> None:
    for _ in range(50):
        n = int(rng.integers(2, 5))
        params = random_params(rng, n)
        path = random_path(rng, params, int(rng.integers(1, 60)))
        start = np.clip(random_weights(rng, n), 0.05, None)
        end = np.clip(random_weights(rng, n), 0.05, None)
        schedule = WeightSchedule.linear(start / start.sum(), end / end.sum(), 0.0, 1.0)
        v0 = float(rng.uniform(1.0, 100.0))
        g0 = float(payoff_closed_form(v0, schedule.at(0.0), path.values[0]))
        v_end = wgm_continuous(v0, schedule, path)
        g_end = payoff_closed_form(v_end, schedule.at(1.0), path.values[-1])
        assert g_end == pytest.approx(continuous_payoff(g0, schedule, path), rel=1e-12)


def test_wgm_continuous_small_jump_matches_discrete_update() -> None:
    grid = PathGrid(0.0, 1.0, 1)
    path = PricePath(grid=grid, values=np.array([[1.0, 1.0], [1.3, 0.8]]))
    w_old = np.array([0.4, 0.6])
    pool = balanced_pool(w_old, path.values[0], 10.0)
    v0 = geometric_mean(pool)
    before_jump = arbitrage_rebalance(pool, path.terminal()).pool
    gaps = []
    for eps in (1e-1, 1e-2, 1e-3):
        w_new = w_old + np.array([eps, -eps])
        schedule = WeightSchedule.table([0.0, 1.0], [w_old, w_new])
        continuous = wgm_continuous(v0, schedule, path)
        discrete = discrete_v_update(v0, before_jump.reserves, w_old, w_new)
        # the discrete jump gives up exactly the arbitrage loss of the re-weighting
        assert discrete / continuous == pytest.approx(reweight_loss(w_old, w_new), rel=1e-12)
        gaps.append(abs(discrete / continuous - 1.0))
    assert gaps[2] < 1e-5
    assert gaps[0] > 50 * gaps[1] > 2500 * gaps[2]


def test_reweighting_pool_is_a_sub_hedge(rng: np.random.Generator) -> None:
    for _ in range(100):
        n = int(rng.integers(2, 5))
        steps = int(rng.integers(1, 51))
        params = random_params(rng, n)
        path = random_path(rng, params, steps)
        table = np.clip(np.stack([random_weights(rng, n) for _ in range(steps + 1)]), 0.02, None)
        table /= table.sum(axis=1, keepdims=True)
        schedule = WeightSchedule.table(path.times, table)
        pool = balanced_pool(schedule.at(0.0), path.values[0], float(rng.uniform(1.0, 100.0)))
        g0 = pool_value(pool, path.initial())
        oracle = simulate_reweighting_pool(pool, schedule, path).g_values[-1]
        assert oracle <= continuous_payoff(g0, schedule, path) * (1 + 1e-12)
