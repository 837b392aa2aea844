"""Thin solver abstraction.

A `ModelHandle` collects columns, linear rows and a linear objective by
name, and is translated into a Pyomo model only when it is solved or
exported. Backends are looked up by name in `BACKENDS`; `SOLVER_BACKEND`
picks one. A backend must return LP duals, so new backends register a
class with the same `solve(handle, gap, time_limit)` signature.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import pyomo.environ as pyo
from pyomo.contrib.appsi.base import TerminationCondition
from pyomo.contrib.appsi.solvers import Highs

from .config import settings
from .errors import ModelError, SolverError

logger = logging.getLogger(__name__)

SENSES = (">=", "<=", "==")


@dataclass
class Column:
    name: str
    lb: Optional[float] = 0.0
    ub: Optional[float] = None
    binary: bool = False


@dataclass
class Row:
    name: str
    coeffs: dict[str, float]
    sense: str
    rhs: float

    def activity(self, values: dict[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.coeffs.items())

    def violation(self, values: dict[str, float]) -> float:
        act = self.activity(values)
        if self.sense == ">=":
            return max(self.rhs - act, 0.0)
        if self.sense == "<=":
            return max(act - self.rhs, 0.0)
        return abs(act - self.rhs)


class ModelHandle:
    """Linear (mixed-integer) minimisation model built by name."""

    def __init__(self, name: str):
        self.name = name
        self.columns: dict[str, Column] = {}
        self.rows: dict[str, Row] = {}
        self.objective: dict[str, float] = {}

    def add_var(self, name: str, lb: Optional[float] = 0.0, ub: Optional[float] = None, binary: bool = False) -> str:
        if name in self.columns:
            raise ModelError(f"variable {name} declared twice in {self.name}")
        if binary:
            lb, ub = 0.0, 1.0
        self.columns[name] = Column(name, lb, ub, binary)
        return name

    def add_row(self, name: str, coeffs: dict[str, float], sense: str, rhs: float) -> str:
        if name in self.rows:
            raise ModelError(f"constraint {name} declared twice in {self.name}")
        if sense not in SENSES:
            raise ModelError(f"constraint {name}: unknown sense {sense!r}")
        for var in coeffs:
            if var not in self.columns:
                raise ModelError(f"constraint {name} references undeclared variable {var}")
        if not math.isfinite(rhs):
            raise ModelError(f"constraint {name}: non-finite right-hand side")
        self.rows[name] = Row(name, {v: c for v, c in coeffs.items() if c != 0.0}, sense, float(rhs))
        return name

    def set_objective(self, coeffs: dict[str, float]):
        for var in coeffs:
            if var not in self.columns:
                raise ModelError(f"objective references undeclared variable {var}")
        self.objective = {v: c for v, c in coeffs.items() if c != 0.0}

    @property
    def is_mip(self) -> bool:
        return any(c.binary for c in self.columns.values())

    @property
    def binaries(self) -> list[str]:
        return [n for n, c in self.columns.items() if c.binary]

    def evaluate(self, values: dict[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.objective.items())

    def fix(self, values: dict[str, float]) -> "ModelHandle":
        """Copy with the given columns fixed (binaries become continuous)."""
        other = ModelHandle(f"{self.name}_fixed")
        for n, col in self.columns.items():
            if n in values:
                v = float(round(values[n])) if col.binary else float(values[n])
                other.columns[n] = Column(n, v, v, False)
            else:
                other.columns[n] = Column(n, col.lb, col.ub, col.binary)
        other.rows = dict(self.rows)
        other.objective = dict(self.objective)
        return other

    def trivially_infeasible(self) -> list[str]:
        return [r.name for r in self.rows.values() if not r.coeffs and r.violation({}) > settings.FEASIBILITY_TOL]

    def to_pyomo(self) -> pyo.ConcreteModel:
        cols = self.columns
        m = pyo.ConcreteModel(name=self.name)
        m.x = pyo.Var(
            list(cols),
            domain=lambda m, n: pyo.Binary if cols[n].binary else pyo.Reals,
            bounds=lambda m, n: (cols[n].lb, cols[n].ub),
        )
        active = [r.name for r in self.rows.values() if r.coeffs]

        def row_rule(m, name):
            r = self.rows[name]
            expr = pyo.quicksum((c * m.x[v] for v, c in r.coeffs.items()), linear=True)
            if r.sense == ">=":
                return expr >= r.rhs
            if r.sense == "<=":
                return expr <= r.rhs
            return expr == r.rhs

        m.c = pyo.Constraint(active, rule=row_rule)
        terms = [(c, v) for v, c in self.objective.items()]
        if not terms:
            terms = [(0.0, next(iter(cols)))]
        m.obj = pyo.Objective(expr=pyo.quicksum((c * m.x[v] for c, v in terms), linear=True), sense=pyo.minimize)
        return m

    def export_lp(self, path: Path | str) -> Path:
        """Write the model in CPLEX LP format with readable names."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_pyomo().write(str(path), io_options={"symbolic_solver_labels": True})
        logger.info("exported %s to %s", self.name, path)
        return path

    def __repr__(self):
        return f"ModelHandle({self.name!r}, cols={len(self.columns)}, rows={len(self.rows)}, mip={self.is_mip})"


@dataclass
class SolveReport:
    status: str  # optimal | infeasible | unbounded | limit
    objective: Optional[float] = None
    primal: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] = field(default_factory=dict)
    reduced_costs: dict[str, float] = field(default_factory=dict)
    gap: Optional[float] = None
    wall_time: float = 0.0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def has_primal(self) -> bool:
        return bool(self.primal)


def _value(var, col: Column) -> float:
    # columns that appear in no row keep no value; any point in their bounds will do
    if var.value is not None:
        return float(var.value)
    v = 0.0 if col.lb is None else max(col.lb, 0.0)
    return v if col.ub is None else min(v, col.ub)


class AppsiHighsBackend:
    name = "appsi_highs"

    def _solver(self, gap: Optional[float], time_limit: Optional[float], presolve: str = "on") -> Highs:
        opt = Highs()
        if not opt.available():
            raise SolverError("HiGHS is not available; install highspy")
        opt.config.load_solution = False
        opt.config.stream_solver = False
        opt.config.time_limit = float(time_limit if time_limit is not None else settings.TIME_LIMIT)
        if gap is not None:
            opt.config.mip_gap = float(gap)
        opt.highs_options = {
            "presolve": presolve,
            "primal_feasibility_tolerance": settings.SOLVER_FEASIBILITY_TOL,
            "dual_feasibility_tolerance": settings.SOLVER_FEASIBILITY_TOL,
            "mip_feasibility_tolerance": settings.SOLVER_FEASIBILITY_TOL,
            "mip_abs_gap": settings.MIP_ABS_GAP,
            "random_seed": 0,
            "threads": 1,
        }
        return opt

    def solve(self, handle: ModelHandle, gap: Optional[float] = None, time_limit: Optional[float] = None) -> SolveReport:
        start = time.perf_counter()
        bad = handle.trivially_infeasible()
        if bad:
            return SolveReport("infeasible", message=f"empty rows violated: {', '.join(bad)}")
        if not handle.columns:
            return SolveReport("optimal", objective=0.0, gap=0.0)

        m = handle.to_pyomo()
        try:
            res = self._solver(gap, time_limit).solve(m)
            tc = res.termination_condition
            if tc == TerminationCondition.infeasibleOrUnbounded:
                res = self._solver(gap, time_limit, presolve="off").solve(m)
                tc = res.termination_condition
        except SolverError:
            raise
        except Exception as exc:
            raise SolverError(f"{self.name} failed on {handle.name}: {exc}") from exc

        report = SolveReport("limit", wall_time=time.perf_counter() - start, message=str(tc))
        if tc == TerminationCondition.optimal:
            report.status = "optimal"
        elif tc == TerminationCondition.infeasible:
            report.status = "infeasible"
        elif tc in (TerminationCondition.unbounded, TerminationCondition.infeasibleOrUnbounded):
            report.status = "unbounded"

        incumbent = res.best_feasible_objective
        if report.status in ("optimal", "limit") and incumbent is not None and math.isfinite(incumbent):
            res.solution_loader.load_vars()
            report.primal = {n: _value(m.x[n], col) for n, col in handle.columns.items()}
            report.objective = handle.evaluate(report.primal)
            bound = res.best_objective_bound
            if handle.is_mip and bound is not None and math.isfinite(bound):
                report.gap = abs(incumbent - bound) / max(abs(incumbent), 1e-10)
            else:
                report.gap = 0.0
            if not handle.is_mip and report.status == "optimal":
                duals = res.solution_loader.get_duals()
                report.duals = {n: 0.0 for n in handle.rows}
                report.duals.update({name: float(duals[m.c[name]]) for name in m.c})
                rc = res.solution_loader.get_reduced_costs()
                report.reduced_costs = {n: float(rc.get(m.x[n], 0.0)) for n in handle.columns}
        elif report.status == "optimal":
            report.status = "limit"

        logger.info(
            "solved %s: %d cols, %d rows, %s, objective=%s, %.2fs",
            handle.name, len(handle.columns), len(handle.rows), report.status,
            f"{report.objective:.6f}" if report.objective is not None else "-", report.wall_time,
        )
        return report


BACKENDS = {AppsiHighsBackend.name: AppsiHighsBackend}


def get_backend(name: Optional[str] = None):
    name = name or settings.SOLVER_BACKEND
    try:
        return BACKENDS[name]()
    except KeyError:
        raise SolverError(f"unknown solver backend {name!r}; available: {', '.join(sorted(BACKENDS))}") from None


def dual_objective(handle: ModelHandle, report: SolveReport) -> float:
    """Dual objective of an LP solve: rhs'y plus bound terms through reduced costs."""
    total = sum(r.rhs * report.duals.get(n, 0.0) for n, r in handle.rows.items())
    total += sum(rc * report.primal.get(n, 0.0) for n, rc in report.reduced_costs.items())
    return total


def solve_lp(model: ModelHandle, backend=None) -> SolveReport:
    if model.is_mip:
        raise ModelError(f"{model.name} has free integer variables; use solve_milp")
    backend = backend or get_backend()
    return backend.solve(model)


def solve_milp(model: ModelHandle, gap: Optional[float] = None, time_limit: Optional[float] = None,
               duals: bool = False, backend=None) -> SolveReport:
    """Solve with integers free; with `duals`, re-solve the LP at the fixed integers.

    The follow-up solve supplies the returned primal values and duals, so
    binaries in the report are exactly 0 or 1.
    """
    backend = backend or get_backend()
    gap = settings.MIP_GAP if gap is None else gap
    report = backend.solve(model, gap=gap, time_limit=time_limit)
    if not (duals and model.is_mip and report.has_primal):
        return report
    fixed = model.fix({n: report.primal[n] for n in model.binaries})
    lp = backend.solve(fixed, time_limit=time_limit)
    if not lp.optimal:
        raise SolverError(f"re-solve of {model.name} at fixed integers ended {lp.status}")
    lp.status = report.status
    lp.gap = report.gap
    lp.wall_time += report.wall_time
    return lp
