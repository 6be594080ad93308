import logging
from enum import Enum
from typing import Annotated

import pandas as pd
import typer

from g3m.cli.deps import ConfigOpt, OutOpt, cli_errors, emit, get_config
from g3m.models import EtaRow, FigureSpec, WeightRow
from g3m.pricing import fig1_sigma_surface, fig1_surface
from g3m.replication import fig2_weights
from g3m.utils import check_rows

logger = logging.getLogger(__name__)


class FigureName(str, Enum):
    ETA = "eta"
    WEIGHTS = "weights"


def eta_frame(spec: FigureSpec) -> pd.DataFrame:
    e = spec.eta
    by_rho = fig1_surface(e.sigma_a, e.sigma_b, e.rho_grid, e.w_grid, e.tau)
    by_sigma = fig1_sigma_surface(e.sigma_grid, e.sigma_b, e.rho, e.w_grid, e.tau)
    frame = pd.concat(
        [by_rho.assign(panel="rho"), by_sigma.assign(panel="sigma")], ignore_index=True
    )
    return check_rows(frame[list(EtaRow.model_fields)], EtaRow)


def weights_frame(spec: FigureSpec) -> pd.DataFrame:
    w = spec.weights
    return check_rows(fig2_weights(w.K, w.sigma, w.r, w.x_grid, w.tau_grid), WeightRow)


def figure(
    name: Annotated[FigureName, typer.Argument(help="Which figure grid to emit.")],
    config: ConfigOpt = None,
    out: OutOpt = None,
) -> None:
    """
    Data behind the eta surface or the protective-put weight grid.
    """
    with cli_errors():
        cfg = get_config(config)
        frame = eta_frame(cfg.figure) if name is FigureName.ETA else weights_frame(cfg.figure)
        logger.info("figure %s: %d rows", name.value, len(frame))
        emit(frame, out or cfg.output)
