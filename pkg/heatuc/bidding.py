import logging
from typing import Mapping, Optional, Sequence

from .config import settings
from .errors import BiddingError, DispatchError, UnknownUnitError
from .models import AdjustedElectricityPosition, BidBlock, BidBook, BidLadder, HeatCostCurve, PositionStep
from .schemas import BlockSpec, Case, ExtractionChp, ForeseenLmps, HeatOnlyUnit, HeatPump, HeatUnit

logger = logging.getLogger(__name__)


def heat_cost_curve(unit: HeatUnit) -> HeatCostCurve:
    """Marginal heat cost as a max of affine functions of the LMP.

    CHP: at low prices the unit runs on its minimum heat-to-power ratio and an
    extra MWh of heat costs its fuel plus the forced electricity, net of the
    electricity revenue (piece L). At high prices it runs at full fuel and an
    extra MWh of heat displaces rho_h/rho_e MWh of electricity (piece H).
    The pieces meet at lam = fuel_cost * rho_e. The curve holds for heat
    outputs of at least `min_fuel_heat`; bids are priced on it.
    """
    if isinstance(unit, ExtractionChp):
        low = (-unit.r, unit.fuel_cost * (unit.rho_h + unit.r * unit.rho_e))
        high = (unit.rho_h / unit.rho_e, 0.0)
        return HeatCostCurve(unit=unit.id, pieces=[low, high])
    if isinstance(unit, HeatPump):
        return HeatCostCurve(unit=unit.id, pieces=[(1.0 / unit.cop, 0.0)])
    if isinstance(unit, HeatOnlyUnit):
        return HeatCostCurve(unit=unit.id, pieces=[(0.0, unit.marginal_cost)])
    raise UnknownUnitError(f"no heat cost curve for unit {getattr(unit, 'id', unit)!r}")


def heat_cost_curves(case: Case) -> dict[str, HeatCostCurve]:
    return {u.id: heat_cost_curve(u) for u in case.heat_units}


def marginal_heat_cost(curves: Mapping[str, HeatCostCurve], unit_id: str, lam: float) -> float:
    try:
        curve = curves[unit_id]
    except KeyError:
        raise UnknownUnitError(f"unit with id: {unit_id} has no heat cost curve") from None
    return curve.value(lam)


def build_heat_bids(unit: HeatUnit, foreseen_lmps: Sequence[float], block_spec: Sequence[BlockSpec],
                    periods: Sequence[int]) -> BidLadder:
    """Heat ladder priced at the curve value of the foreseen LMP plus block markups."""
    if not block_spec:
        raise BiddingError(f"empty block_spec for unit {unit.id}")
    if len(foreseen_lmps) != len(periods):
        raise BiddingError(f"unit {unit.id}: {len(foreseen_lmps)} foreseen LMPs for {len(periods)} periods")
    curve = heat_cost_curve(unit)
    steps = {}
    for t, lam in zip(periods, foreseen_lmps):
        base = curve.value(lam)
        blocks = [BidBlock(price=base + spec.markup, quantity=spec.quantity) for spec in block_spec]
        steps[t] = sorted(blocks, key=lambda blk: blk.price)
    return BidLadder(unit=unit.id, market="heat", steps=steps)


def build_bid_book(case: Case, foreseen: Optional[ForeseenLmps] = None) -> BidBook:
    """Heat ladders for every heat unit of the case."""
    foreseen = foreseen or case.bids.foreseen_lmps
    zero = [0.0] * len(case.periods)
    book: BidBook = {}
    for unit in case.heat_units:
        if isinstance(unit, HeatOnlyUnit):
            lmps = zero
        else:
            lmps = foreseen.at(unit.node_power)
            if lmps is None:
                raise BiddingError(f"no foreseen LMPs for bus {unit.node_power} of unit {unit.id}")
        book[unit.id] = build_heat_bids(unit, lmps, case.heat_blocks(unit.id), case.periods)
    return book


def adjust_electricity_position(
    unit: ExtractionChp | HeatPump,
    heat_dispatch: Mapping[int, float],
    last_selected_bid: Mapping[int, Optional[int]],
    committed: Optional[Mapping[int, bool]] = None,
) -> AdjustedElectricityPosition:
    """Electricity position implied by a heat dispatch.

    `last_selected_bid[t]` is the index of the last selected heat block, or
    None when no block is selected. `committed` defaults to "some block is
    selected"; a committed CHP with no heat still burns its minimum fuel.
    """
    if isinstance(unit, HeatOnlyUnit) or not isinstance(unit, (ExtractionChp, HeatPump)):
        raise DispatchError(f"unit {unit.id} has no electricity position")
    tol = settings.FEASIBILITY_TOL
    steps = {}
    for t, q in heat_dispatch.items():
        on = committed[t] if committed is not None else last_selected_bid.get(t) is not None
        if q < -tol or q > unit.heat_capability + tol or (q > tol and not on):
            raise DispatchError(f"heat dispatch {q:g} of unit {unit.id} at period {t} is outside its capability")
        q = max(q, 0.0)
        if isinstance(unit, HeatPump):
            steps[t] = PositionStep(period=t, committed=on, heat=q, self_commit=-q / unit.cop)
            continue
        if not on:
            steps[t] = PositionStep(period=t, committed=False, heat=0.0, self_commit=0.0,
                                    flex_price=unit.electricity_cost)
            continue
        minimum = max(unit.r * q, (unit.f_min - unit.rho_h * q) / unit.rho_e)
        top = (unit.f_max - unit.rho_h * q) / unit.rho_e
        steps[t] = PositionStep(
            period=t,
            committed=True,
            heat=q,
            self_commit=minimum,
            flex_quantity=max(top - minimum, 0.0),
            flex_price=unit.electricity_cost,
        )
    return AdjustedElectricityPosition(unit=unit.id, node_power=unit.node_power, steps=steps)
