from typing import Annotated

import typer

from .routers import clear, compare, oracle, uc, validate
from .utils import configure_logging

app = typer.Typer(
    help="Day-ahead heat and electricity market clearing with electricity-aware heat unit commitment.",
    no_args_is_help=True,
    add_completion=False,
)


@app.callback()
def main(verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging.")] = False):
    configure_logging("DEBUG" if verbose else None)


app.add_typer(validate.router, name="validate")
app.add_typer(clear.router, name="clear")
app.add_typer(uc.router, name="uc")
app.add_typer(compare.router, name="compare")
app.add_typer(oracle.router, name="oracle")
