from pathlib import Path
from typing import Annotated

import typer

from ..errors import ExitCode, HeatUcError
from ..loader import resolve_case_path
from ..utils import fail, make_config, run_and_report
from . import BigMOpt, CaseOpt, ExportLpOpt, GammaOpt, GapOpt, OutOpt, ProfileOpt, TimeLimitOpt

router = typer.Typer()


@router.callback(invoke_without_command=True)
def uc(
    case: CaseOpt,
    model: Annotated[str, typer.Option("--model", "-m", help="decoupled or aware")] = "aware",
    gamma: GammaOpt = None,
    gap: GapOpt = None,
    time_limit: TimeLimitOpt = None,
    out: OutOpt = Path("results"),
    profile: ProfileOpt = None,
    export_lp: ExportLpOpt = None,
    big_m: BigMOpt = "dual_box",
):
    """Solve the heat unit commitment, then clear both markets at its plan."""
    try:
        if model not in ("decoupled", "aware"):
            raise HeatUcError(f"--model must be decoupled or aware, got {model!r}", ExitCode.USAGE)
        config = make_config(case_path=resolve_case_path(case), model=model, gamma=gamma, gap=gap,
                             time_limit=time_limit, out_dir=out, profile_path=profile, export_lp=export_lp,
                             big_m=big_m)
    except HeatUcError as exc:
        raise fail(exc, out)
    run_and_report(config)
