"""Heat unit commitment.

`solve_decoupled_uc` commits heat units against the heat market alone.
`solve_aware` anticipates both markets: for a fixed commitment z the heat
and electricity clearings are merged into one LP whose objective weighs
heat cost by gamma and electricity cost by 1 - gamma, so that as gamma
tends to 1 the LP optimum is the sequential (heat first) outcome. That LP
is replaced by its primal feasibility, dual feasibility and strong duality
conditions, which makes the electricity prices available as variables:
LMP = y_balance / (1 - gamma). Products of duals and commitment binaries
are linearised exactly with McCormick envelopes, and every selected heat
block of a CHP or heat pump must cover its marginal heat cost at those
prices.

With zero pipe delays the rows of every period stand alone once the status
of units with start-up costs or minimum times is known, so `solve_by_period`
runs a dynamic program over that status and solves one small MILP per
period and status.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Union

from . import compact
from .bidding import heat_cost_curves
from .compact import CompactModel, LinearRow
from .config import settings
from .errors import (
    ConsistencyError,
    DualBoundError,
    InfeasibleClearingError,
    ModelError,
    SolverError,
    SolverLimitError,
)
from .market import clear_heat, run_sequential
from .models import AwareSolution, BidBook, DecoupledSolution, HeatCostCurve, NodePrice, UnitDispatch
from .schemas import Case, HeatUnit
from .solver import ModelHandle, SolveReport, solve_lp, solve_milp

logger = logging.getLogger(__name__)

BigM = Union[str, float]


def _check_milp(report: SolveReport, model: str, case: Case):
    if report.status == "infeasible":
        raise InfeasibleClearingError(model, list(case.periods), sorted(case.heat_networks()),
                                      f"{model} has no feasible commitment")
    if report.status == "unbounded":
        raise SolverError(f"{model} is unbounded")
    if not report.has_primal:
        raise SolverLimitError(f"{model} stopped at a solver limit without an incumbent ({report.message})")
    if report.status == "limit":
        logger.warning("%s stopped at a solver limit; using the best incumbent (gap %.3g)", model, report.gap or float("nan"))


def _add_z(handle: ModelHandle, cm: CompactModel, fixed: Optional[dict[str, float]] = None):
    fixed = fixed or {}
    for k in cm.z:
        handle.add_var(k, binary=True)
        if k in fixed:
            handle.columns[k].lb = handle.columns[k].ub = float(fixed[k])
    for row in cm.uc.rows:
        handle.add_row(row.name, row.coeffs, row.sense, row.rhs)


def _add_primal_row(handle: ModelHandle, row: LinearRow):
    coeffs = dict(row.coeffs)
    for k, c in row.rhs_z.items():
        coeffs[k] = coeffs.get(k, 0.0) - c
    handle.add_row(row.name, coeffs, row.sense, row.rhs)


def decoupled_handle(case: Case, bids: BidBook) -> tuple[ModelHandle, CompactModel]:
    z, c0, uc = compact.uc_part(case)
    cm = CompactModel(list(case.periods), z, c0, uc, compact.heat_part(case, bids), compact.Part(compact.ELECTRICITY))
    handle = ModelHandle("decoupled_uc")
    _add_z(handle, cm)
    for col, lb in cm.heat.columns.items():
        handle.add_var(col, lb=lb)
    for row in cm.heat.rows:
        _add_primal_row(handle, row)
    handle.set_objective({**cm.c0, **cm.heat.cost})
    return handle, cm


def solve_decoupled_uc(case: Case, bids: BidBook, gap: Optional[float] = None,
                       time_limit: Optional[float] = None) -> DecoupledSolution:
    """Heat UC and dispatch cost minimisation, blind to the electricity market."""
    handle, cm = decoupled_handle(case, bids)
    report = solve_milp(handle, gap=gap, time_limit=time_limit)
    _check_milp(report, "decoupled heat UC", case)
    z = {k: float(round(report.primal[k])) for k in cm.z}
    plan = compact.plan_from_z(case, z)
    heat = clear_heat(case, plan, bids)
    commitment = sum(cm.c0[k] * v for k, v in z.items() if k in cm.c0)
    return DecoupledSolution(plan=plan, heat=heat, objective=commitment + heat.objective,
                             gap=report.gap or 0.0, optimal=report.optimal)


def highest_electricity_price(case: Case) -> float:
    prices = [blk.price for g in case.units.thermal for blk in case.electricity_blocks(g.id)]
    prices += [chp.electricity_cost for chp in case.units.chp]
    return max(prices, default=0.0)


def dual_bound(case: Case, bids: BidBook) -> float:
    """Box on the (unscaled) market duals."""
    heat = [blk.price for ladder in bids.values() for step in ladder.steps.values() for blk in step]
    return settings.DUAL_BOUND_FACTOR * max(highest_electricity_price(case), max(heat, default=0.0), 1.0)


@dataclass(frozen=True)
class ValidityConstraint:
    """price + tol >= slope * lmp + intercept - big_m * (1 - selected)."""

    unit: str
    block: int
    period: int
    bus: str
    piece: int
    price: float
    slope: float
    intercept: float
    big_m: float
    tol: float

    @property
    def name(self) -> str:
        return f"validity[{self.unit},{self.block},{self.period},{self.piece}]"

    def slack(self, lmp: float, selected: float) -> float:
        return self.price + self.tol - (self.slope * lmp + self.intercept - self.big_m * (1.0 - selected))

    def row(self, lmp_terms: dict[str, float], sel: str) -> tuple[dict[str, float], float]:
        coeffs = {v: -self.slope * c for v, c in lmp_terms.items()}
        coeffs[sel] = coeffs.get(sel, 0.0) - self.big_m
        return coeffs, self.intercept - self.big_m - self.price - self.tol


def big_m_values(case: Case, curves: dict[str, HeatCostCurve], policy: BigM, lmp_bound: float) -> dict[str, float]:
    out = {}
    for unit in case.coupled_units:
        curve = curves[unit.id]
        if isinstance(policy, (int, float)):
            value = float(policy)
        elif policy == "dual_box":
            value = max(curve.value(-lmp_bound), curve.value(lmp_bound), 0.0)
        elif policy == "bid_cap":
            value = max(curve.value(0.0), curve.value(highest_electricity_price(case)), 0.0)
        else:
            raise ModelError(f"unknown big-M policy {policy!r}")
        if not math.isfinite(value):
            raise ModelError(f"non-finite big-M for unit {unit.id}")
        out[unit.id] = value
    return out


def build_bid_validity(case: Case, curves: dict[str, HeatCostCurve], bids: BidBook,
                       big_m: BigM = "dual_box", lmp_bound: Optional[float] = None,
                       periods: Optional[list[int]] = None) -> list[ValidityConstraint]:
    """One constraint per CHP/heat-pump block, period and curve piece.

    Enforcing validity on every selected block equals enforcing it on the
    last selected one because ladders are nondecreasing and selection is
    monotone.
    """
    lmp_bound = dual_bound(case, bids) if lmp_bound is None else lmp_bound
    m_values = big_m_values(case, curves, big_m, lmp_bound)
    out = []
    for unit in case.coupled_units:
        ladder = bids[unit.id]
        for t in case.periods if periods is None else periods:
            for b in range(len(case.heat_blocks(unit.id))):
                for p, (k, m) in enumerate(curves[unit.id].pieces):
                    out.append(ValidityConstraint(
                        unit=unit.id, block=b, period=t, bus=unit.node_power, piece=p,
                        price=ladder.price(b, t), slope=k, intercept=m,
                        big_m=m_values[unit.id], tol=settings.VALIDITY_TOL,
                    ))
    return out


def dual_name(row: str) -> str:
    return f"y[{row}]"


def mccormick_name(row: str, z: str) -> str:
    return f"mc[{row},{z}]"


@dataclass
class AwareMilp:
    handle: ModelHandle
    compact: CompactModel
    gamma: float
    bound: float
    weights: dict[str, float]
    cost: dict[str, float] = field(default_factory=dict)
    dual_box: dict[str, tuple[float, float]] = field(default_factory=dict)
    mccormick: list[tuple[str, str, str]] = field(default_factory=list)  # (w, y, z)
    validity: list[ValidityConstraint] = field(default_factory=list)

    def lmp(self, values: dict[str, float], bus: str, t: int) -> float:
        row = self.compact.electricity.balance[(bus, t)]
        return values[dual_name(row)] / (1.0 - self.gamma)


def build_aware_milp(case: Case, bids: BidBook, gamma: float, big_m: BigM = "dual_box",
                     periods: Optional[list[int]] = None, fixed: Optional[dict[str, float]] = None) -> AwareMilp:
    """Single-level MILP of the electricity-aware heat UC.

    On a period subset the commitment cost covers no-load costs only; the
    caller prices start-ups. `fixed` pins commitment binaries by name.
    """
    if not 0.0 < gamma < 1.0:
        raise ModelError(f"gamma must lie in (0, 1), got {gamma}")
    cm = compact.build_compact(case, bids, periods=periods)
    bound = dual_bound(case, bids)
    sliced = cm.periods != list(case.periods)
    handle = ModelHandle(f"aware_uc[{cm.periods[0]}]" if sliced else "aware_uc")
    _add_z(handle, cm, fixed)

    # merged middle/lower level: gamma on heat, 1 - gamma on electricity
    cost: dict[str, float] = {}
    weights: dict[str, float] = {}
    for part, weight in ((cm.heat, gamma), (cm.electricity, 1.0 - gamma)):
        for col, lb in part.columns.items():
            handle.add_var(col, lb=lb)
            cost[col] = weight * part.cost.get(col, 0.0)
        for row in part.rows:
            weights[row.name] = weight
    for row in cm.market_rows:
        _add_primal_row(handle, row)
    # rows over no column carry no dual information
    rows = [r for r in cm.market_rows if r.coeffs or r.rhs_z]

    milp = AwareMilp(handle, cm, gamma, bound, weights, cost)
    col_terms: dict[str, dict[str, float]] = {col: {} for col in cm.market_columns}
    for row in rows:
        cap = weights[row.name] * bound
        lo = 0.0 if row.sense == ">=" else -cap
        y = handle.add_var(dual_name(row.name), lb=lo, ub=cap)
        milp.dual_box[row.name] = (lo, cap)
        for col, c in row.coeffs.items():
            col_terms[col][y] = c

    for col, lb in cm.market_columns.items():
        handle.add_row(f"dual[{col}]", col_terms[col], "<=" if lb is not None else "==", cost[col])

    duality = {dual_name(r.name): r.rhs for r in rows}
    for col, c in cost.items():
        duality[col] = duality.get(col, 0.0) - c
    for row in rows:
        y = dual_name(row.name)
        lo, hi = milp.dual_box[row.name]
        for zk, h in row.rhs_z.items():
            w = handle.add_var(mccormick_name(row.name, zk), lb=min(lo, 0.0), ub=max(hi, 0.0))
            handle.add_row(f"mc_hi[{row.name},{zk}]", {zk: hi, w: -1.0}, ">=", 0.0)
            handle.add_row(f"mc_lo[{row.name},{zk}]", {w: 1.0, zk: -lo}, ">=", 0.0)
            handle.add_row(f"mc_y_lo[{row.name},{zk}]", {y: 1.0, w: -1.0, zk: lo}, ">=", lo)
            handle.add_row(f"mc_y_hi[{row.name},{zk}]", {w: 1.0, y: -1.0, zk: -hi}, ">=", -hi)
            duality[w] = duality.get(w, 0.0) + h
            milp.mccormick.append((w, y, zk))
    handle.add_row("strong_duality", duality, ">=", 0.0)

    milp.validity = build_bid_validity(case, heat_cost_curves(case), bids, big_m, lmp_bound=bound,
                                       periods=cm.periods)
    for v in milp.validity:
        row = cm.electricity.balance[(v.bus, v.period)]
        coeffs, rhs = v.row({dual_name(row): 1.0 / (1.0 - gamma)}, compact.sel_name(v.unit, v.block, v.period))
        handle.add_row(v.name, coeffs, ">=", rhs)

    no_load = {compact.u_name(u.id, t) for u in case.heat_units for t in cm.periods}
    objective = {k: gamma * c for k, c in cm.c0.items() if not sliced or k in no_load}
    objective.update(cost)
    handle.set_objective(objective)
    log = logger.debug if sliced else logger.info
    log("%s: %d binaries, %d envelopes, %d validity rows, dual bound %g",
        handle.name, len(cm.z), len(milp.mccormick), len(milp.validity), bound)
    return milp


DUAL_REGULARISATION = 1e-3


def resolve_fixed(milp: AwareMilp, report: SolveReport) -> dict[str, float]:
    """Re-solve at the incumbent binaries, picking the smallest sign-constrained duals.

    With z fixed, strong duality pins the primal cost, so the extra
    objective term only chooses among optimal dual solutions.
    """
    fixed = milp.handle.fix({k: report.primal[k] for k in milp.compact.z})
    objective = dict(fixed.objective)
    for row, (lo, _) in milp.dual_box.items():
        if lo == 0.0:
            objective[dual_name(row)] = objective.get(dual_name(row), 0.0) + DUAL_REGULARISATION
    fixed.set_objective(objective)
    lp = solve_lp(fixed)
    if not lp.optimal:
        raise SolverError(f"re-solve of {milp.handle.name} at fixed commitment ended {lp.status}")
    return lp.primal


def _check_dual_bounds(milp: AwareMilp, x: dict[str, float]):
    at_bound = []
    for row in milp.compact.market_rows:
        if row.name not in milp.dual_box:
            continue
        # rows switched off by z have unbounded duals that no term prices
        if row.rhs_z and all(round(x[k]) == 0 for k in row.rhs_z):
            continue
        lo, hi = milp.dual_box[row.name]
        y = x[dual_name(row.name)]
        if hi > 0 and (y >= hi * (1 - 1e-6) or (lo < 0 and y <= lo * (1 - 1e-6))):
            at_bound.append(row.name)
    if at_bound:
        raise DualBoundError({"message": "duals at their artificial bound; raise DUAL_BOUND_FACTOR",
                              "rows": at_bound[:20]})


def mccormick_error(milp: AwareMilp, x: dict[str, float]) -> float:
    return max((abs(x[w] - x[y] * round(x[z])) for w, y, z in milp.mccormick), default=0.0)


def strong_duality_gap(milp: AwareMilp, x: dict[str, float]) -> float:
    """(dual - primal) / max(1, |primal|) of the merged market LP."""
    primal = sum(c * x[v] for v, c in milp.cost.items())
    return milp.handle.rows["strong_duality"].activity(x) / max(1.0, abs(primal))


def status_linked_units(case: Case) -> list[HeatUnit]:
    """Units whose status links periods through start-up costs or minimum up/down times."""
    return [u for u in case.heat_units if u.startup_cost > 0 or u.min_up > 1 or u.min_down > 1]


def status_moves(unit: HeatUnit, state: tuple[int, int]) -> list[tuple[int, tuple[int, int], float]]:
    """(status, next state, start-up cost) reachable from (status, periods in that status)."""
    on, age = state
    cap = max(unit.min_up, unit.min_down, 1)
    moves = [(on, (on, min(age + 1, cap)), 0.0)]
    if age >= (unit.min_up if on else unit.min_down):
        moves.append((1 - on, (1 - on, 1), 0.0 if on else unit.startup_cost))
    return moves


def period_decomposable(case: Case) -> bool:
    n_sets = 2 ** len(status_linked_units(case)) * len(case.periods)
    return all(p.delay == 0 for p in case.pipes) and n_sets <= settings.AWARE_PERIOD_MODELS


@dataclass
class _PeriodModel:
    milp: AwareMilp
    report: SolveReport

    @property
    def value(self) -> float:
        return self.report.objective if self.report.has_primal else math.inf


def _solve_period(case: Case, bids: BidBook, gamma: float, big_m: BigM, t: int, on: dict[str, int],
                  gap: Optional[float], time_limit: Optional[float]) -> _PeriodModel:
    milp = build_aware_milp(case, bids, gamma, big_m, periods=[t],
                            fixed={compact.u_name(j, t): float(v) for j, v in on.items()})
    report = solve_milp(milp.handle, gap=gap, time_limit=time_limit)
    if report.status == "unbounded":
        raise SolverError(f"{milp.handle.name} is unbounded")
    if report.status == "limit" and not report.has_primal:
        raise SolverLimitError(f"{milp.handle.name} stopped at a solver limit without an incumbent ({report.message})")
    return _PeriodModel(milp, report)


def solve_by_period(case: Case, bids: BidBook, gamma: float, big_m: BigM = "dual_box", gap: Optional[float] = None,
                    time_limit: Optional[float] = None) -> list[_PeriodModel]:
    """Exact aware UC by dynamic programming over the status of linking units.

    With zero pipe delays the merged market LP and the validity rows split
    by period, so for a fixed status of the linking units each period is an
    aware MILP of its own. The recursion adds their start-up costs.
    """
    units = status_linked_units(case)
    cache: dict[tuple[int, tuple[int, ...]], _PeriodModel] = {}

    def period_model(t: int, status: tuple[int, ...]) -> _PeriodModel:
        if (t, status) not in cache:
            on = {u.id: s for u, s in zip(units, status)}
            cache[(t, status)] = _solve_period(case, bids, gamma, big_m, t, on, gap, time_limit)
        return cache[(t, status)]

    start = tuple((int(u.initial_on), max(u.min_up, u.min_down, 1)) for u in units)
    frontier: dict[tuple, tuple[float, list[tuple[int, ...]]]] = {start: (0.0, [])}
    for t in case.periods:
        reached: dict[tuple, tuple[float, list[tuple[int, ...]]]] = {}
        for state, (cost, path) in frontier.items():
            for moves in product(*(status_moves(u, s) for u, s in zip(units, state))):
                status = tuple(m[0] for m in moves)
                value = period_model(t, status).value
                if math.isinf(value):
                    continue
                total = cost + gamma * sum(m[2] for m in moves) + value
                nxt = tuple(m[1] for m in moves)
                if nxt not in reached or total < reached[nxt][0]:
                    reached[nxt] = (total, path + [status])
        if not reached:
            raise InfeasibleClearingError("electricity-aware heat UC", [t], sorted(case.heat_networks()),
                                          f"no status of {', '.join(u.id for u in units) or 'the heat units'} "
                                          f"clears period {t}")
        frontier = reached

    objective, path = min(frontier.values(), key=lambda v: v[0])
    logger.info("aware UC by period: %d period models, objective %.6f", len(cache), objective)
    return [cache[(t, status)] for t, status in zip(case.periods, path)]


def solve_aware(case: Case, bids: BidBook, gamma: Optional[float] = None, big_m: BigM = "dual_box",
                gap: Optional[float] = None, time_limit: Optional[float] = None, strict: bool = False,
                export_lp=None, method: Optional[str] = None) -> AwareSolution:
    """Electricity-aware heat UC.

    `method` is "monolithic" (one MILP over the horizon), "period" (exact
    decomposition, zero pipe delays only) or "auto", which takes the
    decomposition whenever `period_decomposable` allows it.
    """
    gamma = settings.GAMMA if gamma is None else gamma
    method = method or settings.AWARE_METHOD
    if method not in ("auto", "monolithic", "period"):
        raise ModelError(f"unknown aware method {method!r}")
    if method == "period" and any(p.delay > 0 for p in case.pipes):
        raise ModelError("the period decomposition requires zero pipe delays")

    decompose = method == "period" or (method == "auto" and period_decomposable(case))
    if export_lp is not None or not decompose:
        milp = build_aware_milp(case, bids, gamma, big_m)
        if export_lp is not None:
            milp.handle.export_lp(export_lp)
    if decompose:
        models = solve_by_period(case, bids, gamma, big_m, gap, time_limit)
    else:
        report = solve_milp(milp.handle, gap=gap, time_limit=time_limit)
        _check_milp(report, "electricity-aware heat UC", case)
        models = [_PeriodModel(milp, report)]

    solved = []
    for pm in models:
        x = resolve_fixed(pm.milp, pm.report)
        _check_dual_bounds(pm.milp, x)
        solved.append((pm.milp, x))
    return _aware_solution(case, bids, gamma, solved,
                           gap=max(pm.report.gap or 0.0 for pm in models),
                           optimal=all(pm.report.optimal for pm in models), strict=strict)


def _aware_solution(case: Case, bids: BidBook, gamma: float, solved: list[tuple[AwareMilp, dict[str, float]]],
                    gap: float, optimal: bool, strict: bool) -> AwareSolution:
    x: dict[str, float] = {}
    for _, values in solved:
        x.update(values)
    on = {u.id: [int(round(x[compact.u_name(u.id, t)])) for t in case.periods] for u in case.heat_units}
    selected = {u.id: [[int(round(x[compact.sel_name(u.id, b, t)])) for t in case.periods]
                       for b in range(len(case.heat_blocks(u.id)))] for u in case.heat_units}
    plan = compact.plan_from_status(case, on, selected)
    heat_cost = sum(case.unit(j).no_load_cost * sum(status) for j, status in plan.on.items())
    heat_cost += sum(sum(cost) for cost in plan.startup_cost.values())
    electricity_cost = 0.0
    lmps, heat_duals, electricity_duals = [], {}, {}
    for milp, values in solved:
        cm = milp.compact
        heat_cost += sum(p * values[c] for c, p in cm.heat.price.items())
        electricity_cost += sum(p * values[c] for c, p in cm.electricity.price.items())
        lmps += [NodePrice(node=bus, period=t, price=milp.lmp(values, bus, t)) for (bus, t) in cm.electricity.balance]
        heat_duals.update({r.name: values[dual_name(r.name)] for r in cm.heat.rows if r.name in milp.dual_box})
        electricity_duals.update({r.name: values[dual_name(r.name)]
                                  for r in cm.electricity.rows if r.name in milp.dual_box})

    heat_dispatch = [
        UnitDispatch(unit=u.id, period=t,
                     heat=sum(x[compact.heat_col(u.id, b, t)] for b in range(len(case.heat_blocks(u.id)))))
        for t in case.periods for u in case.heat_units
    ]
    electricity_dispatch = []
    for t in case.periods:
        for g in case.units.thermal:
            power = sum(x[compact.elec_col(g.id, k, t)] for k in range(len(case.electricity_blocks(g.id))))
            electricity_dispatch.append(UnitDispatch(unit=g.id, period=t, power=power))
        for w in case.units.wind:
            electricity_dispatch.append(UnitDispatch(unit=w.id, period=t, power=x[compact.wind_col(w.id, t)]))
        for chp in case.units.chp:
            electricity_dispatch.append(UnitDispatch(unit=chp.id, period=t, power=x[compact.chp_power_col(chp.id, t)]))

    seq = run_sequential(case, plan, bids)
    mismatch = 0.0
    for d in heat_dispatch:
        mismatch = max(mismatch, abs(d.heat - seq.heat.unit_dispatch(d.unit, d.period).heat))
    for p in lmps:
        mismatch = max(mismatch, abs(p.price - seq.electricity.price_at(p.node, p.period)))
    consistent = mismatch <= settings.CONSISTENCY_TOL
    if not consistent:
        logger.warning("aware solution differs from the sequential clearing by %.3g; "
                       "the heat market may have multiple optima", mismatch)
        if strict:
            raise ConsistencyError({"mismatch": mismatch, "tolerance": settings.CONSISTENCY_TOL})

    return AwareSolution(
        plan=plan,
        gamma=gamma,
        heat_dispatch=heat_dispatch,
        electricity_dispatch=electricity_dispatch,
        lmps=sorted(lmps, key=lambda p: (p.period, p.node)),
        heat_duals=heat_duals,
        electricity_duals=electricity_duals,
        heat_cost=heat_cost,
        electricity_cost=electricity_cost,
        objective=gamma * heat_cost + (1.0 - gamma) * electricity_cost,
        gap=gap,
        duality_gap=max((strong_duality_gap(m, v) for m, v in solved), key=abs),
        mccormick_error=max(mccormick_error(m, v) for m, v in solved),
        consistency_mismatch=mismatch,
        consistent=consistent,
        sequential=seq,
        optimal=optimal,
    )
