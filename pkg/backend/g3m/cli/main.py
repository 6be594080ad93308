from collections.abc import Callable

import typer

from g3m.cli.commands import figure, price, replicate, simulate

commands: dict[str, Callable[..., None]] = {
    "price": price.price,
    "simulate": simulate.simulate,
    "replicate": replicate.replicate,
    "figure": figure.figure,
}


def include_commands(app: typer.Typer) -> None:
    for name, command in commands.items():
        app.command(name)(command)
