from pathlib import Path
from typing import Annotated

import typer

from ..errors import HeatUcError
from ..loader import resolve_case_path
from ..utils import fail, make_config, run_and_report
from . import CaseOpt, GammaOpt, OutOpt, ProfileOpt

router = typer.Typer()


@router.callback(invoke_without_command=True)
def oracle(
    case: CaseOpt,
    gamma: GammaOpt = None,
    out: OutOpt = Path("results"),
    profile: ProfileOpt = None,
    validity_filter: Annotated[bool, typer.Option(
        "--validity-filter/--no-validity-filter",
        help="Keep only plans whose selected CHP and heat-pump bids recover their cost.")] = True,
):
    """Exhaustive enumeration of commitments (small cases only)."""
    try:
        config = make_config(case_path=resolve_case_path(case), model="oracle", gamma=gamma, out_dir=out,
                             profile_path=profile, validity_filter=validity_filter)
    except HeatUcError as exc:
        raise fail(exc, out)
    run_and_report(config)
