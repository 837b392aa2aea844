"""Day-ahead heat and electricity market clearing.

The markets are cleared sequentially: the heat market first, then the
electricity market with the CHP and heat-pump positions the heat dispatch
implies. Two other orderings exist in the literature (electricity first,
or one joint clearing); they coincide with this one under unique optima
and are not implemented.
"""
import logging
from typing import Mapping, Optional, Sequence

from . import compact
from .bidding import adjust_electricity_position, heat_cost_curves
from .config import settings
from .errors import InfeasibleClearingError, SolverError, SolverLimitError
from .models import (
    AdjustedElectricityPosition,
    BidBook,
    BlockAcceptance,
    CommitmentPlan,
    Curtailment,
    Flow,
    HeatCostCurve,
    MarketOutcome,
    NodePrice,
    PeriodCost,
    SequentialResult,
    UnitDispatch,
    ValidityEntry,
    ValidityReport,
)
from .schemas import Case
from .solver import ModelHandle, SolveReport, dual_objective, solve_lp

logger = logging.getLogger(__name__)


def _raise_for_status(report: SolveReport, market: str, locate):
    if report.status == "infeasible":
        bad_periods, locations = locate()
        raise InfeasibleClearingError(market, bad_periods, locations)
    if report.status == "limit":
        raise SolverLimitError(f"{market} clearing stopped at a solver limit: {report.message}")
    if not report.optimal:
        raise SolverError(f"{market} clearing ended {report.status}")


def _outcome(market: str, part: compact.Part, handle: ModelHandle, report: SolveReport,
             periods: list[int], dispatch: list[UnitDispatch], fixed_cost: float = 0.0) -> MarketOutcome:
    x = report.primal
    accepted = [
        BlockAcceptance(unit=ref.unit, block=ref.block, period=ref.period, price=ref.price,
                        quantity=ref.quantity, accepted=x[col])
        for col, ref in part.blocks.items()
    ]
    prices = [NodePrice(node=node, period=t, price=report.duals[row]) for (node, t), row in part.balance.items()]
    flows = [
        Flow(link=link, period=t, flow=sum(c * x.get(v, 0.0) for v, c in coeffs.items()))
        for (link, t), coeffs in part.flows.items()
    ]
    residual = max((handle.rows[row].violation(x) for row in part.balance.values()), default=0.0)
    lp_objective = handle.evaluate(x)
    dual = dual_objective(handle, report)
    if abs(lp_objective - dual) > settings.DUALITY_TOL * max(1.0, abs(lp_objective)):
        logger.warning("%s clearing: primal %.9g and dual %.9g objectives differ", market, lp_objective, dual)
    return MarketOutcome(
        market=market,
        periods=periods,
        accepted=sorted(accepted, key=lambda a: (a.period, a.unit, a.block)),
        dispatch=sorted(dispatch, key=lambda d: (d.period, d.unit)),
        prices=sorted(prices, key=lambda p: (p.period, p.node)),
        flows=sorted(flows, key=lambda f: (f.period, f.link)),
        objective=sum(a.price * a.accepted for a in accepted),
        lp_objective=lp_objective,
        dual_objective=dual,
        balance_residual=residual,
        fixed_cost=fixed_cost,
    )


def _heat_shortfall(case: Case, commitment: CommitmentPlan, bids: BidBook, periods: list[int]):
    networks = case.heat_networks()
    short_periods, short_networks = [], set()
    for t in periods:
        for name, members in networks.items():
            load = sum(case.heat_load(n)[case.index(t)] for n in members)
            capacity = sum(
                bids[u.id].quantity(b, t)
                for u in case.heat_units if u.node_heat in members
                for b in range(len(case.heat_blocks(u.id)))
                if commitment.is_selected(u.id, b, t)
            )
            if capacity < load - settings.FEASIBILITY_TOL:
                short_networks.add(name)
                if t not in short_periods:
                    short_periods.append(t)
    if not short_periods:
        return periods, sorted(networks)
    return short_periods, sorted(short_networks)


def clear_heat(case: Case, commitment: CommitmentPlan, bids: BidBook,
               periods: Optional[Sequence[int]] = None) -> MarketOutcome:
    """Optimal heat flow for a fixed commitment and bid selection."""
    periods = compact.resolve_periods(case, periods)
    part = compact.heat_part(case, bids, periods)
    handle = compact.lp_handle("heat_clearing", [part], compact.z_from_plan(case, commitment))
    report = solve_lp(handle)
    _raise_for_status(report, "heat", lambda: _heat_shortfall(case, commitment, bids, periods))

    dispatch = []
    for unit in case.heat_units:
        for t in periods:
            heat = sum(report.primal[compact.heat_col(unit.id, b, t)] for b in range(len(case.heat_blocks(unit.id))))
            dispatch.append(UnitDispatch(unit=unit.id, period=t, heat=heat))
    return _outcome("heat", part, handle, report, periods, dispatch)


def _electricity_shortfall(case: Case, positions: Mapping[str, AdjustedElectricityPosition], periods: list[int]):
    bad = []
    for t in periods:
        demand = sum(case.electric_load(b.id)[case.index(t)] for b in case.buses)
        must_run = sum(p.steps[t].self_commit for p in positions.values())
        flexible = sum(p.steps[t].flex_quantity for p in positions.values())
        supply = sum(blk.quantity for g in case.units.thermal for blk in case.electricity_blocks(g.id))
        supply += sum(case.wind_available(w.id)[case.index(t)] for w in case.units.wind)
        if must_run > demand + settings.FEASIBILITY_TOL or must_run + flexible + supply < demand - settings.FEASIBILITY_TOL:
            bad.append(t)
    return (bad, ["system"]) if bad else (periods, sorted(b.id for b in case.buses))


def clear_electricity(case: Case, positions: Mapping[str, AdjustedElectricityPosition],
                      periods: Optional[Sequence[int]] = None) -> MarketOutcome:
    """DC-OPF clearing with self-commitments as fixed injections."""
    periods = compact.resolve_periods(case, periods)
    part = compact.electricity_part(case, periods, positions=dict(positions))
    handle = compact.lp_handle("electricity_clearing", [part], {})
    report = solve_lp(handle)
    _raise_for_status(report, "electricity", lambda: _electricity_shortfall(case, positions, periods))

    x = report.primal
    dispatch = []
    for g in case.units.thermal:
        for t in periods:
            power = sum(x[compact.elec_col(g.id, k, t)] for k in range(len(case.electricity_blocks(g.id))))
            dispatch.append(UnitDispatch(unit=g.id, period=t, power=power))
    for w in case.units.wind:
        for t in periods:
            dispatch.append(UnitDispatch(unit=w.id, period=t, power=x[compact.wind_col(w.id, t)]))
    fixed_cost = 0.0
    for chp in case.units.chp:
        for t in periods:
            step = positions[chp.id].steps[t]
            power = step.self_commit + x[compact.flex_col(chp.id, t)]
            fixed_cost += step.self_commit * chp.electricity_cost
            dispatch.append(UnitDispatch(unit=chp.id, period=t, heat=step.heat, power=power))
    for hp in case.units.heat_pump:
        for t in periods:
            step = positions[hp.id].steps[t]
            dispatch.append(UnitDispatch(unit=hp.id, period=t, heat=step.heat, consumption=-step.self_commit))
    return _outcome("electricity", part, handle, report, periods, dispatch, fixed_cost)


def positions_from_heat(case: Case, commitment: CommitmentPlan, heat: MarketOutcome) -> dict[str, AdjustedElectricityPosition]:
    positions = {}
    for unit in case.coupled_units:
        dispatch = {t: heat.unit_dispatch(unit.id, t).heat for t in heat.periods}
        last = {t: commitment.last_selected(unit.id, t) for t in heat.periods}
        on = {t: commitment.is_on(unit.id, t) for t in heat.periods}
        positions[unit.id] = adjust_electricity_position(unit, dispatch, last, on)
    return positions


def curtailment(case: Case, electricity: MarketOutcome) -> list[Curtailment]:
    out = []
    for t in electricity.periods:
        available = sum(case.wind_available(w.id)[case.index(t)] for w in case.units.wind)
        dispatched = sum(electricity.unit_dispatch(w.id, t).power for w in case.units.wind)
        out.append(Curtailment(period=t, available=available, dispatched=dispatched))
    return out


def run_sequential(case: Case, commitment: CommitmentPlan, bids: BidBook,
                   periods: Optional[Sequence[int]] = None) -> SequentialResult:
    heat = clear_heat(case, commitment, bids, periods)
    positions = positions_from_heat(case, commitment, heat)
    electricity = clear_electricity(case, positions, heat.periods)
    return SequentialResult(
        heat=heat,
        positions=positions,
        electricity=electricity,
        curtailment=curtailment(case, electricity),
    )


def check_cost_recovery(case: Case, seq: SequentialResult,
                        curves: Optional[Mapping[str, HeatCostCurve]] = None) -> ValidityReport:
    """Flag accepted heat blocks priced below the marginal heat cost at the realised LMP."""
    curves = curves or heat_cost_curves(case)
    coupled = {u.id: u for u in case.coupled_units}
    entries = []
    for a in seq.heat.accepted:
        if a.unit not in coupled or a.accepted <= settings.FEASIBILITY_TOL:
            continue
        lmp = seq.electricity.price_at(coupled[a.unit].node_power, a.period)
        cost = curves[a.unit].value(lmp)
        valid = a.price >= cost - settings.VALIDITY_TOL
        entries.append(ValidityEntry(
            unit=a.unit, block=a.block, period=a.period, price=a.price, accepted=a.accepted,
            lmp=lmp, marginal_cost=cost, valid=valid, loss=0.0 if valid else (cost - a.price) * a.accepted,
        ))
    report = ValidityReport(entries=entries)
    if report.violations:
        logger.warning("%d accepted heat bids do not recover their marginal cost", len(report.violations))
    return report


def period_costs(case: Case, plan: CommitmentPlan, seq: SequentialResult) -> list[PeriodCost]:
    """Cost decomposition per period.

    Heat-pump heat bids are left out of the heat cost, their cost shows up
    as electricity demand. CHP electricity is valued at its marginal
    electricity cost, self-committed output included.
    """
    heat_pumps = {u.id for u in case.units.heat_pump}
    chps = {u.id: u for u in case.units.chp}
    out = []
    for t in seq.heat.periods:
        commitment = sum(
            u.no_load_cost * plan.is_on(u.id, t) + plan.startup_cost[u.id][plan.periods.index(t)]
            for u in case.heat_units
        )
        heat = sum(a.price * a.accepted for a in seq.heat.accepted if a.period == t and a.unit not in heat_pumps)
        electricity = sum(a.price * a.accepted for a in seq.electricity.accepted
                          if a.period == t and a.unit not in chps)
        electricity += sum(seq.electricity.unit_dispatch(j, t).power * u.electricity_cost for j, u in chps.items())
        out.append(PeriodCost(period=t, commitment=commitment, heat=heat, electricity=electricity))
    return out
