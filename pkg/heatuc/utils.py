import logging
import logging.config
from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from .config import settings
from .errors import ExitCode, HeatUcError
from .report import write_error
from .schemas import ScenarioConfig

console = Console()
err_console = Console(stderr=True)


def configure_logging(level: Optional[str] = None):
    path = Path(settings.LOG_CONFIG)
    if path.exists():
        logging.config.fileConfig(path, disable_existing_loggers=False)
    else:
        logging.basicConfig(format="%(message)s", handlers=[RichHandler(show_path=False)])
    logging.getLogger("heatuc").setLevel(level or settings.LOG_LEVEL)


def make_config(**fields) -> ScenarioConfig:
    try:
        return ScenarioConfig(**{k: v for k, v in fields.items() if v is not None})
    except ValidationError as exc:
        raise HeatUcError([f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()],
                          ExitCode.USAGE) from exc


def fail(exc: HeatUcError, out_dir: Optional[Path] = None) -> typer.Exit:
    """Report the error, write error.json when there is an output directory and return the exit."""
    if out_dir is not None:
        write_error(exc, out_dir)
    err_console.print(f"[bold red]{type(exc).__name__}[/bold red]: {escape(str(exc.detail))}")
    return typer.Exit(code=int(exc.exit_code))


def print_outcome(outcome):
    table = Table(title=f"{outcome.case.name}")
    for col in ("model", "overall", "heat system", "electricity", "curtailment %", "invalid bids"):
        table.add_column(col, justify="left" if col == "model" else "right")
    for r in outcome.results:
        table.add_row(r.model, f"{r.total('overall'):.2f}", f"{r.total('heat_system'):.2f}",
                      f"{r.total('electricity'):.2f}", f"{r.sequential.curtailment_percent:.2f}",
                      str(len(r.validity.violations)))
    console.print(table)
    if outcome.comparison is not None:
        cmp = Table(title="comparison (costs in 10^3 $)")
        for col in ("metric", "decoupled", "aware", "delta"):
            cmp.add_column(col, justify="left" if col == "metric" else "right")
        for row in outcome.comparison.rows:
            cmp.add_row(row.metric, f"{row.decoupled:.3f}", f"{row.aware:.3f}", f"{row.delta:+.3f}")
        console.print(cmp)


def run_and_report(config: ScenarioConfig):
    from .scenario import run_scenario

    try:
        outcome = run_scenario(config)
    except HeatUcError as exc:
        raise fail(exc, config.out_dir)
    print_outcome(outcome)
    console.print(f"results written to {config.out_dir}")
    if not outcome.optimal:
        raise fail(HeatUcError("a MILP stopped at a solver limit; results use the best incumbent",
                               ExitCode.SOLVER_LIMIT), config.out_dir)
