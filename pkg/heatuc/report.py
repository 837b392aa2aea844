"""Result tables.

Every table is written with a fixed column order, sorted rows and a fixed
float format, so two runs on the same inputs produce identical files.
"""
import logging
from pathlib import Path
from typing import Optional, Sequence

import orjson
import pandas as pd

from .errors import HeatUcError, MismatchedCaseError
from .market import check_cost_recovery, period_costs
from .models import CommitmentPlan, ComparisonReport, ComparisonRow, RunResult, SequentialResult
from .schemas import Case

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"


def build_run_result(case: Case, model: str, plan: CommitmentPlan, seq: SequentialResult,
                     objective: float, gap: float = 0.0, optimal: bool = True) -> RunResult:
    return RunResult(
        model=model,
        fingerprint=case.fingerprint(),
        plan=plan,
        sequential=seq,
        validity=check_cost_recovery(case, seq),
        costs=period_costs(case, plan, seq),
        objective=objective,
        gap=gap,
        optimal=optimal,
    )


def _write(rows: list[dict], columns: list[str], sort: list[str], path: Path) -> Path:
    df = pd.DataFrame(rows, columns=columns)
    if not df.empty:
        df = df.sort_values(sort, kind="mergesort").reset_index(drop=True)
    floats = list(df.select_dtypes("float").columns)
    if floats:
        # -0.0 prints as -0.000000
        df[floats] = df[floats].round(9) + 0.0
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %s (%d rows)", path, len(df))
    return path


def summary_rows(result: RunResult) -> list[dict]:
    rows = []
    for c in result.costs:
        curt = next(x for x in result.sequential.curtailment if x.period == c.period)
        rows.append({
            "model": result.model, "period": str(c.period), "commitment": c.commitment, "heat": c.heat,
            "heat_system": c.heat_system, "electricity": c.electricity, "overall": c.overall,
            "curtailment_pct": curt.percent,
        })
    rows.append({
        "model": result.model, "period": "total", "commitment": result.total("commitment"),
        "heat": result.total("heat"), "heat_system": result.total("heat_system"),
        "electricity": result.total("electricity"), "overall": result.total("overall"),
        "curtailment_pct": result.sequential.curtailment_percent,
    })
    return rows


def dispatch_rows(case: Case, result: RunResult) -> list[dict]:
    seq = result.sequential
    rows = []
    units = [*case.heat_units, *case.units.thermal, *case.units.wind]
    for t in seq.heat.periods:
        for unit in units:
            e = seq.electricity.unit_dispatch(unit.id, t)
            rows.append({
                "model": result.model, "period": t, "unit": unit.id,
                "heat": seq.heat.unit_dispatch(unit.id, t).heat, "power": e.power, "consumption": e.consumption,
            })
    return rows


def write_results(case: Case, results: Sequence[RunResult], out_dir: Path,
                  comparison: Optional[ComparisonReport] = None) -> list[Path]:
    """Write every table for the given runs; one `model` column tells them apart."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    rows = [r for res in results for r in summary_rows(res)]
    written.append(_write(rows, ["model", "period", "commitment", "heat", "heat_system", "electricity",
                                 "overall", "curtailment_pct"], ["model"], out_dir / "summary.csv"))

    rows = [r for res in results for r in dispatch_rows(case, res)]
    written.append(_write(rows, ["model", "period", "unit", "heat", "power", "consumption"],
                          ["model", "period", "unit"], out_dir / "dispatch.csv"))

    rows = [{"model": res.model, "period": p.period, "bus": p.node, "lmp": p.price}
            for res in results for p in res.sequential.electricity.prices]
    written.append(_write(rows, ["model", "period", "bus", "lmp"], ["model", "period", "bus"], out_dir / "lmps.csv"))

    rows = [{"model": res.model, "period": c.period, "available": c.available, "dispatched": c.dispatched,
             "curtailed": c.curtailed, "percent": c.percent}
            for res in results for c in res.sequential.curtailment]
    written.append(_write(rows, ["model", "period", "available", "dispatched", "curtailed", "percent"],
                          ["model", "period"], out_dir / "curtailment.csv"))

    rows = [{"model": res.model, **e.model_dump()} for res in results for e in res.validity.entries]
    written.append(_write(rows, ["model", "unit", "block", "period", "price", "accepted", "lmp",
                                 "marginal_cost", "valid", "loss"],
                          ["model", "period", "unit", "block"], out_dir / "validity.csv"))

    rows = []
    for res in results:
        plan = res.plan
        for j in plan.on:
            for i, t in enumerate(plan.periods):
                rows.append({
                    "model": res.model, "unit": j, "period": t, "on": plan.on[j][i],
                    "startup": plan.startup[j][i], "shutdown": plan.shutdown[j][i],
                    "startup_cost": plan.startup_cost[j][i],
                    "selected_blocks": sum(row[i] for row in plan.selected[j]),
                })
    written.append(_write(rows, ["model", "unit", "period", "on", "startup", "shutdown", "startup_cost",
                                 "selected_blocks"], ["model", "unit", "period"], out_dir / "plan.csv"))

    for network, members in case.heat_networks().items():
        units = [u.id for u in case.heat_units if u.node_heat in members]
        rows = [
            {"model": res.model, "period": t, **{j: res.sequential.heat.unit_dispatch(j, t).heat for j in units}}
            for res in results for t in res.sequential.heat.periods
        ]
        written.append(_write(rows, ["model", "period", *units], ["model", "period"],
                              out_dir / f"heat_dispatch_{network}.csv"))

    rows = []
    for res in results:
        for t in res.sequential.electricity.periods:
            for w in case.units.wind:
                available = case.wind_available(w.id)[case.index(t)]
                dispatched = res.sequential.electricity.unit_dispatch(w.id, t).power
                rows.append({"model": res.model, "period": t, "farm": w.id, "available": available,
                             "dispatched": dispatched, "curtailed": max(available - dispatched, 0.0)})
    written.append(_write(rows, ["model", "period", "farm", "available", "dispatched", "curtailed"],
                          ["model", "period", "farm"], out_dir / "wind.csv"))

    if comparison is not None:
        written.append(write_comparison(comparison, out_dir))
    return written


def emit_comparison(decoupled: RunResult, aware: RunResult) -> ComparisonReport:
    """Costs in 10^3 $ and curtailment in % of available wind, plus cost-recovery losses."""
    if decoupled.fingerprint != aware.fingerprint:
        raise MismatchedCaseError(f"runs were made on different cases "
                                  f"({decoupled.fingerprint[:12]} vs {aware.fingerprint[:12]})")
    rows = [
        ComparisonRow(metric="overall_cost", decoupled=decoupled.total("overall") / 1e3,
                      aware=aware.total("overall") / 1e3),
        ComparisonRow(metric="heat_cost", decoupled=decoupled.total("heat_system") / 1e3,
                      aware=aware.total("heat_system") / 1e3),
        ComparisonRow(metric="electricity_cost", decoupled=decoupled.total("electricity") / 1e3,
                      aware=aware.total("electricity") / 1e3),
        ComparisonRow(metric="wind_curtailment_pct", decoupled=decoupled.sequential.curtailment_percent,
                      aware=aware.sequential.curtailment_percent),
    ]
    deltas: dict[str, float] = {}
    for d in aware.sequential.heat.dispatch:
        deltas[d.unit] = deltas.get(d.unit, 0.0) + d.heat
    for d in decoupled.sequential.heat.dispatch:
        deltas[d.unit] = deltas.get(d.unit, 0.0) - d.heat
    return ComparisonReport(
        rows=rows,
        losses={"decoupled": decoupled.validity.loss_by_unit(), "aware": aware.validity.loss_by_unit()},
        dispatch_deltas=dict(sorted(deltas.items())),
    )


def write_comparison(report: ComparisonReport, out_dir: Path) -> Path:
    rows = [{"metric": r.metric, "decoupled": r.decoupled, "aware": r.aware, "delta": r.delta}
            for r in report.rows]
    units = sorted(set(report.losses.get("decoupled", {})) | set(report.losses.get("aware", {})))
    for j in units:
        dec = report.losses.get("decoupled", {}).get(j, 0.0)
        awa = report.losses.get("aware", {}).get(j, 0.0)
        rows.append({"metric": f"cost_recovery_loss[{j}]", "decoupled": dec, "aware": awa, "delta": awa - dec})
    df = pd.DataFrame(rows, columns=["metric", "decoupled", "aware", "delta"])
    df[["decoupled", "aware", "delta"]] = df[["decoupled", "aware", "delta"]].round(9) + 0.0
    path = Path(out_dir) / "comparison.csv"
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %s", path)
    return path


def write_error(exc: HeatUcError, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "error.json"
    path.write_bytes(orjson.dumps(exc.to_dict(), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2))
    return path
