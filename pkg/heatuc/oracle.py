"""Brute-force reference for small cases.

Every feasible on/off trajectory of every heat unit is enumerated. With
zero pipe delays the markets decouple by period, so for a given set of
committed units the best bid selection of a period is found once by
running the single-period sequential clearing for every selection level
and cached.
"""
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from . import compact
from .bidding import heat_cost_curves
from .config import settings
from .errors import EnumerationBudgetError, InfeasibleClearingError, ModelError
from .market import clear_heat, run_sequential
from .models import BidBook, CommitmentPlan, OracleResult
from .schemas import Case, UnitBase

logger = logging.getLogger(__name__)

Trajectory = tuple[int, ...]


def feasible_trajectory(unit: UnitBase, trajectory: Trajectory) -> bool:
    """Minimum up and down times over the horizon, windows truncated at its start."""
    prev = int(unit.initial_on)
    von, voff = [], []
    for status in trajectory:
        von.append(int(status > prev))
        voff.append(int(status < prev))
        prev = status
    for i, status in enumerate(trajectory):
        if sum(von[max(0, i - unit.min_up + 1): i + 1]) > status:
            return False
        if sum(voff[max(0, i - unit.min_down + 1): i + 1]) > 1 - status:
            return False
    return True


def unit_trajectories(unit: UnitBase, n_periods: int) -> list[Trajectory]:
    return [traj for traj in itertools.product((0, 1), repeat=n_periods) if feasible_trajectory(unit, traj)]


def count_trajectories(case: Case) -> int:
    return math.prod(len(unit_trajectories(u, len(case.periods))) for u in case.heat_units)


def _period_plan(case: Case, levels: dict[str, int], on: frozenset[str]) -> CommitmentPlan:
    T = len(case.periods)
    status = {u.id: [int(u.id in on)] * T for u in case.heat_units}
    selected = {
        u.id: [[int(b < levels.get(u.id, 0))] * T for b in range(len(case.heat_blocks(u.id)))]
        for u in case.heat_units
    }
    return compact.plan_from_status(case, status, selected)


def _selection_valid(case: Case, bids: BidBook, curves, seq, t: int, levels: dict[str, int]) -> bool:
    for unit in case.coupled_units:
        lmp = seq.electricity.price_at(unit.node_power, t)
        cost = curves[unit.id].value(lmp)
        for b in range(levels.get(unit.id, 0)):
            if bids[unit.id].price(b, t) < cost - settings.VALIDITY_TOL:
                return False
    return True


def best_levels(case: Case, bids: BidBook, gamma: float, validity_filter: bool,
                t: int, on: frozenset[str]) -> tuple[float, dict[str, int], int]:
    """Cheapest selection levels of the committed units in period t.

    Returns (period cost, levels, clearings run); the cost is infinite when
    no selection clears. Ties go to the lowest levels.
    """
    units = [u for u in case.heat_units if u.id in on]
    curves = heat_cost_curves(case)
    no_load = sum(u.no_load_cost for u in units)
    best, best_levels_, runs = math.inf, {}, 0
    for combo in itertools.product(*(range(len(case.heat_blocks(u.id)) + 1) for u in units)):
        levels = {u.id: lvl for u, lvl in zip(units, combo)}
        plan = _period_plan(case, levels, on)
        runs += 1
        try:
            if validity_filter:
                seq = run_sequential(case, plan, bids, [t])
                if not _selection_valid(case, bids, curves, seq, t, levels):
                    continue
                cost = gamma * (no_load + seq.heat.objective)
                cost += (1.0 - gamma) * (seq.electricity.objective + seq.electricity.fixed_cost)
            else:
                cost = no_load + clear_heat(case, plan, bids, [t]).objective
        except InfeasibleClearingError:
            continue
        if cost < best - 1e-9 * max(1.0, abs(best) if math.isfinite(best) else 1.0):
            best, best_levels_ = cost, levels
    return best, best_levels_, runs


def _best_levels_job(args):
    return best_levels(*args)


def enumerate_oracle(case: Case, bids: BidBook, gamma: Optional[float] = None, validity_filter: bool = True,
                     budget: Optional[int] = None, workers: Optional[int] = None) -> OracleResult:
    """Optimal commitment by exhaustive search.

    With the validity filter the objective matches the aware model's
    (gamma-weighted heat and electricity cost); without it only heat cost
    counts, as in the decoupled model.
    """
    gamma = settings.GAMMA if gamma is None else gamma
    budget = settings.ORACLE_BUDGET if budget is None else budget
    workers = settings.ORACLE_WORKERS if workers is None else workers
    if any(p.delay > 0 for p in case.pipes):
        raise ModelError("enumeration needs zero pipe delays")
    T = len(case.periods)
    units = case.heat_units
    per_unit = [unit_trajectories(u, T) for u in units]
    total = math.prod(len(t) for t in per_unit)
    if total > budget:
        raise EnumerationBudgetError({"trajectories": total, "budget": budget})
    logger.info("enumerating %d commitment trajectories", total)

    keys = set()
    for joint in itertools.product(*per_unit):
        for i, t in enumerate(case.periods):
            keys.add((t, frozenset(u.id for u, traj in zip(units, joint) if traj[i])))
    keys = sorted(keys, key=lambda k: (k[0], sorted(k[1])))
    jobs = [(case, bids, gamma, validity_filter, t, on) for t, on in keys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_best_levels_job, jobs))
    else:
        results = [_best_levels_job(job) for job in jobs]
    period_best = dict(zip(keys, results))
    clearings = sum(r[2] for r in results)

    weight = gamma if validity_filter else 1.0
    best_cost, best_joint = math.inf, None
    for joint in itertools.product(*per_unit):
        cost = 0.0
        for unit, traj in zip(units, joint):
            prev = int(unit.initial_on)
            for status in traj:
                cost += weight * unit.startup_cost * int(status > prev)
                prev = status
        for i, t in enumerate(case.periods):
            cost += period_best[(t, frozenset(u.id for u, traj in zip(units, joint) if traj[i]))][0]
            if not math.isfinite(cost):
                break
        if cost < best_cost - 1e-9 * max(1.0, abs(best_cost) if math.isfinite(best_cost) else 1.0):
            best_cost, best_joint = cost, joint
    if best_joint is None:
        raise InfeasibleClearingError("enumeration", list(case.periods), sorted(case.heat_networks()),
                                      "no commitment clears every period")

    on = {u.id: list(traj) for u, traj in zip(units, best_joint)}
    selected = {u.id: [[0] * T for _ in case.heat_blocks(u.id)] for u in units}
    for i, t in enumerate(case.periods):
        levels = period_best[(t, frozenset(u.id for u in units if on[u.id][i]))][1]
        for j, level in levels.items():
            for b in range(level):
                selected[j][b][i] = 1
    plan = compact.plan_from_status(case, on, selected)
    try:
        seq = run_sequential(case, plan, bids)
    except InfeasibleClearingError as exc:
        # only reachable without the filter, which never clears electricity
        logger.warning("electricity clearing of the enumerated plan failed: %s", exc.detail)
        seq = None
    return OracleResult(
        plan=plan,
        objective=best_cost,
        enumerated=total,
        evaluated_clearings=clearings,
        validity_filter=validity_filter,
        sequential=seq,
    )
