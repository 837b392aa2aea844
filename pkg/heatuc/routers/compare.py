from pathlib import Path

import typer

from ..errors import HeatUcError
from ..loader import resolve_case_path
from ..utils import fail, make_config, run_and_report
from . import BigMOpt, CaseOpt, ExportLpOpt, GammaOpt, GapOpt, OutOpt, ProfileOpt, TimeLimitOpt

router = typer.Typer()


@router.callback(invoke_without_command=True)
def compare(
    case: CaseOpt,
    gamma: GammaOpt = None,
    gap: GapOpt = None,
    time_limit: TimeLimitOpt = None,
    out: OutOpt = Path("results"),
    profile: ProfileOpt = None,
    export_lp: ExportLpOpt = None,
    big_m: BigMOpt = "dual_box",
):
    """Run the decoupled and the electricity-aware models and compare them."""
    try:
        config = make_config(case_path=resolve_case_path(case), model="compare", gamma=gamma, gap=gap,
                             time_limit=time_limit, out_dir=out, profile_path=profile, export_lp=export_lp,
                             big_m=big_m)
    except HeatUcError as exc:
        raise fail(exc, out)
    run_and_report(config)
