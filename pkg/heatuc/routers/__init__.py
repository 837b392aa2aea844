from pathlib import Path
from typing import Annotated, Optional

import typer

CaseOpt = Annotated[str, typer.Option("--case", "-c", help="Case file, or the name of a bundled case.")]
OutOpt = Annotated[Path, typer.Option("--out", "-o", help="Output directory.")]
GammaOpt = Annotated[Optional[float], typer.Option("--gamma", help="Heat weight of the merged market objective.")]
GapOpt = Annotated[Optional[float], typer.Option("--gap", help="Relative MIP gap.")]
TimeLimitOpt = Annotated[Optional[float], typer.Option("--time-limit", help="Solver time limit in seconds.")]
ProfileOpt = Annotated[Optional[Path], typer.Option("--profile", help="Foreseen-LMP profile replacing the case's.")]
ExportLpOpt = Annotated[Optional[Path], typer.Option("--export-lp", help="Write the aware MILP in LP format.")]
BigMOpt = Annotated[str, typer.Option("--big-m", help="Big-M policy of the bid validity rows: dual_box or bid_cap.")]
