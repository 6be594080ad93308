import logging
from typing import Annotated

import typer

from g3m import __version__
from g3m.cli.main import include_commands
from g3m.core.config import settings

# stderr, so log lines never mix into CSV written to stdout
logging.basicConfig(level=settings.LOG_LEVEL)

app = typer.Typer(
    name=settings.PROJECT_NAME,
    help="Geometric mean market makers: LP pricing, re-weighting and replication.",
    no_args_is_help=True,
    add_completion=False,
)


def version_callback(value: bool) -> None:
    if value:
        typer.echo(f"{settings.PROJECT_NAME} {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[  # noqa: ARG001
        bool | None,
        typer.Option("--version", callback=version_callback, is_eager=True),
    ] = None,
) -> None:
    pass


include_commands(app)
