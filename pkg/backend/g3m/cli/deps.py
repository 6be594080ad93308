import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import pandas as pd
import typer
from pydantic import ValidationError

from g3m.core.errors import EXIT_VALIDATION, G3MError, ReplicabilityError
from g3m.market import SEED_LIMIT
from g3m.models import ScenarioConfig, load_config
from g3m.utils import write_csv

logger = logging.getLogger(__name__)

ConfigOpt = Annotated[
    Path | None,
    typer.Option("--config", "-c", help="Scenario document (TOML).", dir_okay=False),
]
SeedOpt = Annotated[
    int | None,
    typer.Option(help="Unsigned 64-bit seed; overrides the document.", min=0, max=SEED_LIMIT - 1),
]
OutOpt = Annotated[
    Path | None,
    typer.Option("--out", "-o", help="CSV destination; stdout when omitted.", dir_okay=False),
]
PathsOpt = Annotated[int | None, typer.Option(help="Number of simulated paths.", min=1)]
StepsOpt = Annotated[int | None, typer.Option(help="Time steps per path.", min=1)]
WorkersOpt = Annotated[int | None, typer.Option(help="Monte Carlo worker threads.", min=1)]
ClampOpt = Annotated[
    bool,
    typer.Option(
        "--clamp-weights",
        help="Clip replicating weights into [0, 1] instead of refusing the payoff.",
    ),
]


def get_config(path: Path | None, seed: int | None = None) -> ScenarioConfig:
    cfg = ScenarioConfig() if path is None else load_config(path)
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    return cfg


def emit(frame: pd.DataFrame, out: Path | None) -> None:
    text = write_csv(frame, out)
    if text is not None:
        typer.echo(text, nl=False)


@contextmanager
def cli_errors() -> Iterator[None]:
    """Turn library and document errors into messages on stderr and an exit code."""
    try:
        yield
    except ReplicabilityError as e:
        typer.echo(f"error: {e.detail}", err=True)
        for v in e.violations:
            typer.echo(f"  x={v.x!r} t={v.t!r} w={v.w!r}", err=True)
        raise typer.Exit(e.exit_code)
    except G3MError as e:
        typer.echo(f"error: {e.detail}", err=True)
        raise typer.Exit(e.exit_code)
    except ValidationError as e:
        for err in e.errors():
            loc = ".".join(str(part) for part in err["loc"])
            typer.echo(f"{loc}: {err['msg']}", err=True)
        raise typer.Exit(EXIT_VALIDATION)
