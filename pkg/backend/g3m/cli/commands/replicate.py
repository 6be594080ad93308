import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from g3m.cli.deps import (
    ClampOpt,
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
from g3m.core.config import settings
from g3m.core.errors import InvalidInputError, ReplicabilityError
from g3m.market import MarketParams, PathGrid, PricePath, simulate_batch
from g3m.models import ReplicationRow
from g3m.pool import FloatArray, PriceVector
from g3m.replication import ReplicationReport, check_replicable, replicate_along_path
from g3m.utils import rows_to_frame

logger = logging.getLogger(__name__)

QUANTILES = {"q05": 0.05, "q50": 0.5, "q95": 0.95}


def _summary_rows(rows: list[ReplicationRow]) -> list[ReplicationRow]:
    columns = [name for name in ReplicationRow.model_fields if name != "label"]
    table = np.array([[getattr(row, name) for name in columns] for row in rows])
    return [
        ReplicationRow(label=label, **dict(zip(columns, np.quantile(table, q, axis=0))))
        for label, q in QUANTILES.items()
    ]


def _row(label: str, report: ReplicationReport) -> ReplicationRow:
    return ReplicationRow(
        label=label,
        max_abs_error=report.max_abs_tracking_error,
        max_rel_error=report.max_rel_tracking_error,
        terminal_gap=report.signed_terminal_gap,
        rel_terminal_gap=report.rel_terminal_gap,
    )


def replicate(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    workers: WorkersOpt = None,
    clamp_weights: ClampOpt = False,
) -> None:
    """
    Hedge a payoff with a risky-asset / money-market pool over simulated paths.
    """
    with cli_errors():
        cfg = get_config(config, seed)
        rep = cfg.replication
        if rep is None:
            raise InvalidInputError("the config has no [replication] section")
        payoff = rep.payoff
        spec = payoff.to_spec()
        p = payoff.bs_params()
        x_grid, t_grid = rep.check_grids()
        violations = check_replicable(spec, x_grid, t_grid)
        if violations and not clamp_weights:
            raise ReplicabilityError(
                f"{payoff.kind} payoff needs weights outside [0, 1]", violations
            )

        market = MarketParams.independent(payoff.r, [rep.path_sigma or payoff.sigma])
        grid = PathGrid(0.0, payoff.expiry, steps or rep.steps)
        batch = simulate_batch(
            market, PriceVector(np.array([rep.s0])), grid, cfg.seed, 0, paths or rep.paths
        )

        def track(values: FloatArray) -> ReplicationReport:
            return replicate_along_path(
                spec,
                p,
                PricePath(grid=grid, values=values),
                reweight_every=rep.reweight_every,
                clamp=clamp_weights,
                leakage=rep.leakage,
                r=payoff.r,
            )

        with ThreadPoolExecutor(max_workers=workers or settings.MC_WORKERS) as executor:
            reports = list(executor.map(track, batch))
        rows = [_row(f"path-{i}", report) for i, report in enumerate(reports)]
        logger.info("replicated %s payoff on %d paths", payoff.kind, len(rows))
        emit(rows_to_frame(rows + _summary_rows(rows), ReplicationRow), out or cfg.output)
