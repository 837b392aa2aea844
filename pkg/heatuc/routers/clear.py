from pathlib import Path

import typer

from ..errors import HeatUcError
from ..loader import resolve_case_path
from ..utils import fail, make_config, run_and_report
from . import CaseOpt, OutOpt, ProfileOpt

router = typer.Typer()


@router.callback(invoke_without_command=True)
def clear(case: CaseOpt, out: OutOpt = Path("results"), profile: ProfileOpt = None):
    """Clear both markets with every heat unit committed and every block selected."""
    try:
        config = make_config(case_path=resolve_case_path(case), model="clear", out_dir=out, profile_path=profile)
    except HeatUcError as exc:
        raise fail(exc, out)
    run_and_report(config)
