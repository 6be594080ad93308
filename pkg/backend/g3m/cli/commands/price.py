import logging

from g3m.cli.deps import (
    ConfigOpt,
    OutOpt,
    PathsOpt,
    SeedOpt,
    StepsOpt,
    WorkersOpt,
    cli_errors,
    emit,
    get_config,
)
from g3m.market import PathGrid
from g3m.models import McSpec, PriceRow, PriceScenario
from g3m.montecarlo import McConfig, experiment_row, price_dynamic_mc, price_lp_mc
from g3m.pool import arbitrage_rebalance, pool_value, require_balanced
from g3m.pricing import eta_constant, eta_time_varying, lp_price_constant
from g3m.utils import rows_to_frame

logger = logging.getLogger(__name__)


def price_scenario(scenario: PriceScenario, mc: McSpec | None, seed: int) -> PriceRow:
    params = scenario.market.to_params()
    pool = scenario.pool.to_pool()
    s0 = scenario.pool.to_prices()
    profit = 0.0
    if scenario.pool.arbitrage:
        pool, _, profit = arbitrage_rebalance(pool, s0)
    else:
        require_balanced(pool, s0)
    g0 = pool_value(pool, s0)
    horizon = scenario.horizon
    schedule = None if scenario.schedule is None else scenario.schedule.to_schedule(horizon)

    if schedule is None:
        eta = eta_constant(pool.weights, params, horizon)
    else:
        eta = eta_time_varying(schedule, params, 0.0, horizon, scenario.quad_steps)
    closed_form = lp_price_constant(g0, eta)
    row = PriceRow(
        experiment=scenario.name,
        closed_form=closed_form,
        g0=g0,
        arbitrage_profit=profit,
        eta=eta,
    )
    if mc is None:
        return row

    cfg = McConfig(
        n_paths=mc.paths,
        grid=PathGrid(0.0, horizon, mc.steps),
        seed=seed,
        mode=mc.mode,
        antithetic=mc.antithetic,
        workers=mc.workers,
    )
    if schedule is None:
        est = price_lp_mc(pool, params, s0, cfg, horizon)
    else:
        est = price_dynamic_mc(g0, schedule, params, s0, cfg, horizon)
    return row.model_copy(update=experiment_row(scenario.name, closed_form, est)._asdict())


def price(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    workers: WorkersOpt = None,
) -> None:
    """
    Closed-form LP-share price and its Monte Carlo check, one row per scenario.
    """
    with cli_errors():
        cfg = get_config(config, seed)
        mc = cfg.mc
        overrides = {
            k: v
            for k, v in {"paths": paths, "steps": steps, "workers": workers}.items()
            if v is not None
        }
        if overrides:
            mc = McSpec.model_validate({**(mc or McSpec()).model_dump(), **overrides})
        rows = []
        for scenario in cfg.scenarios:
            logger.info("pricing scenario %s", scenario.name)
            rows.append(price_scenario(scenario, mc, cfg.seed))
        emit(rows_to_frame(rows, PriceRow), out or cfg.output)
