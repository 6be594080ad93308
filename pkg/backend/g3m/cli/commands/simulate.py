import logging

from g3m.cli.deps import ConfigOpt, OutOpt, SeedOpt, StepsOpt, cli_errors, emit, get_config
from g3m.core.errors import InvalidInputError
from g3m.dynamic import simulate_reweighting_pool
from g3m.market import PathGrid, PricePath, simulate_batch
from g3m.models import TrajectoryRow
from g3m.pool import arbitrage_rebalance
from g3m.utils import check_rows

logger = logging.getLogger(__name__)


def simulate(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    steps: StepsOpt = None,
) -> None:
    """
    Step a re-weighting pool along one simulated price path.
    """
    with cli_errors():
        cfg = get_config(config, seed)
        sim = cfg.simulation
        if sim is None:
            raise InvalidInputError("the config has no [simulation] section")
        params = sim.market.to_params()
        pool = sim.pool.to_pool()
        s0 = sim.pool.to_prices()
        if sim.pool.arbitrage:
            pool = arbitrage_rebalance(pool, s0).pool
        grid = PathGrid(0.0, sim.horizon, steps or sim.steps)
        values = simulate_batch(
            params, s0, grid, cfg.seed, sim.path_index, sim.path_index + 1
        )[0]
        trajectory = simulate_reweighting_pool(
            pool,
            sim.schedule.to_schedule(sim.horizon),
            PricePath(grid=grid, values=values),
            reweight_every=sim.reweight_every,
        )
        logger.info("simulated %d steps on path %d", grid.steps, sim.path_index)
        emit(check_rows(trajectory.to_frame(), TrajectoryRow), out or cfg.output)
