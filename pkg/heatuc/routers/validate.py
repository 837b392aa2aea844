import typer
from rich.table import Table

from ..errors import HeatUcError
from ..loader import load_case, resolve_case_path
from ..oracle import count_trajectories
from ..utils import console, fail
from . import CaseOpt

router = typer.Typer()


@router.callback(invoke_without_command=True)
def validate(case: CaseOpt):
    """Parse and validate a case file."""
    try:
        loaded = load_case(resolve_case_path(case))
    except HeatUcError as exc:
        raise fail(exc)

    table = Table(title=f"{loaded.name} is valid")
    table.add_column("item")
    table.add_column("count", justify="right")
    table.add_row("periods", str(len(loaded.periods)))
    table.add_row("buses", str(len(loaded.buses)))
    table.add_row("lines", str(len(loaded.lines)))
    table.add_row("heat networks", str(len(loaded.heat_networks())))
    table.add_row("CHPs", str(len(loaded.units.chp)))
    table.add_row("heat pumps", str(len(loaded.units.heat_pump)))
    table.add_row("heat-only units", str(len(loaded.units.heat_only)))
    table.add_row("thermal plants", str(len(loaded.units.thermal)))
    table.add_row("wind farms", str(len(loaded.units.wind)))
    if len(loaded.periods) <= 12:
        table.add_row("commitment trajectories", str(count_trajectories(loaded)))
    console.print(table)
    console.print(f"fingerprint {loaded.fingerprint()}")
