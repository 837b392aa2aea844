from typing import Literal, Optional

from pydantic import BaseModel

Market = Literal["heat", "electricity"]


class ResultModel(BaseModel):
    class Config:
        frozen = True


class BidBlock(ResultModel):
    price: float
    quantity: float


class BidLadder(ResultModel):
    unit: str
    market: Market
    steps: dict[int, list[BidBlock]]

    def price(self, block: int, period: int) -> float:
        return self.steps[period][block].price

    def quantity(self, block: int, period: int) -> float:
        return self.steps[period][block].quantity

    @property
    def n_blocks(self) -> int:
        return max((len(b) for b in self.steps.values()), default=0)


BidBook = dict[str, BidLadder]


class HeatCostCurve(ResultModel):
    """Marginal heat cost as a function of the electricity price.

    Stored as affine pieces (slope, intercept); the curve is their maximum.
    """

    unit: str
    pieces: list[tuple[float, float]]

    def value(self, lam: float) -> float:
        return max(k * lam + m for k, m in self.pieces)


class PositionStep(ResultModel):
    period: int
    committed: bool
    heat: float
    self_commit: float
    flex_quantity: float = 0.0
    flex_price: float = 0.0


class AdjustedElectricityPosition(ResultModel):
    unit: str
    node_power: str
    steps: dict[int, PositionStep]


class CommitmentPlan(ResultModel):
    """On/off status, start-up and shut-down indicators and bid selections.

    Series are indexed by position in `periods`; `selected[unit][block][i]`.
    """

    periods: list[int]
    on: dict[str, list[int]]
    startup: dict[str, list[int]]
    shutdown: dict[str, list[int]]
    startup_cost: dict[str, list[float]]
    selected: dict[str, list[list[int]]]
    delays: dict[str, int] = {}

    def _i(self, period: int) -> int:
        return period - self.periods[0]

    def is_on(self, unit: str, period: int) -> bool:
        return bool(self.on[unit][self._i(period)])

    def is_selected(self, unit: str, block: int, period: int) -> bool:
        return bool(self.selected[unit][block][self._i(period)])

    def last_selected(self, unit: str, period: int) -> Optional[int]:
        last = None
        for b, row in enumerate(self.selected[unit]):
            if row[self._i(period)]:
                last = b
        return last

    def commitment_vector(self) -> dict[str, list[int]]:
        return {u: list(v) for u, v in sorted(self.on.items())}


class BlockAcceptance(ResultModel):
    unit: str
    block: int
    period: int
    price: float
    quantity: float
    accepted: float


class UnitDispatch(ResultModel):
    unit: str
    period: int
    heat: float = 0.0
    power: float = 0.0
    consumption: float = 0.0


class NodePrice(ResultModel):
    node: str
    period: int
    price: float


class Flow(ResultModel):
    link: str
    period: int
    flow: float


class MarketOutcome(ResultModel):
    market: Market
    periods: list[int]
    accepted: list[BlockAcceptance]
    dispatch: list[UnitDispatch]
    prices: list[NodePrice]
    flows: list[Flow]
    objective: float
    lp_objective: float
    dual_objective: float
    balance_residual: float
    # costs that do not come from accepted blocks (CHP self-commitment)
    fixed_cost: float = 0.0

    def price_at(self, node: str, period: int) -> float:
        for p in self.prices:
            if p.node == node and p.period == period:
                return p.price
        raise KeyError((node, period))

    def unit_dispatch(self, unit: str, period: int) -> UnitDispatch:
        for d in self.dispatch:
            if d.unit == unit and d.period == period:
                return d
        return UnitDispatch(unit=unit, period=period)


class Curtailment(ResultModel):
    period: int
    available: float
    dispatched: float

    @property
    def curtailed(self) -> float:
        return max(self.available - self.dispatched, 0.0)

    @property
    def percent(self) -> float:
        return 100.0 * self.curtailed / self.available if self.available > 0 else 0.0


class SequentialResult(ResultModel):
    heat: MarketOutcome
    positions: dict[str, AdjustedElectricityPosition]
    electricity: MarketOutcome
    curtailment: list[Curtailment]

    @property
    def curtailment_percent(self) -> float:
        available = sum(c.available for c in self.curtailment)
        curtailed = sum(c.curtailed for c in self.curtailment)
        return 100.0 * curtailed / available if available > 0 else 0.0


class ValidityEntry(ResultModel):
    unit: str
    block: int
    period: int
    price: float
    accepted: float
    lmp: float
    marginal_cost: float
    valid: bool
    loss: float


class ValidityReport(ResultModel):
    entries: list[ValidityEntry]

    @property
    def violations(self) -> list[ValidityEntry]:
        return [e for e in self.entries if not e.valid]

    def loss_by_unit(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for e in self.entries:
            out[e.unit] = out.get(e.unit, 0.0) + e.loss
        return dict(sorted(out.items()))


class PeriodCost(ResultModel):
    period: int
    commitment: float
    heat: float
    electricity: float

    @property
    def heat_system(self) -> float:
        return self.commitment + self.heat

    @property
    def overall(self) -> float:
        return self.heat_system + self.electricity


class DecoupledSolution(ResultModel):
    plan: CommitmentPlan
    heat: MarketOutcome
    objective: float
    gap: float
    optimal: bool = True


class AwareSolution(ResultModel):
    plan: CommitmentPlan
    gamma: float
    heat_dispatch: list[UnitDispatch]
    electricity_dispatch: list[UnitDispatch]
    lmps: list[NodePrice]
    heat_duals: dict[str, float]
    electricity_duals: dict[str, float]
    heat_cost: float
    electricity_cost: float
    objective: float
    gap: float
    duality_gap: float
    mccormick_error: float
    consistency_mismatch: float
    consistent: bool
    sequential: SequentialResult
    optimal: bool = True


class OracleResult(ResultModel):
    plan: CommitmentPlan
    objective: float
    enumerated: int
    evaluated_clearings: int
    validity_filter: bool
    sequential: Optional[SequentialResult] = None


class RunResult(ResultModel):
    """Everything a scenario writes for one model run."""

    model: str
    fingerprint: str
    plan: CommitmentPlan
    sequential: SequentialResult
    validity: ValidityReport
    costs: list[PeriodCost]
    objective: float
    gap: float = 0.0
    optimal: bool = True

    def total(self, attr: str) -> float:
        return sum(getattr(c, attr) for c in self.costs)


class ComparisonRow(ResultModel):
    metric: str
    decoupled: float
    aware: float

    @property
    def delta(self) -> float:
        return self.aware - self.decoupled


class ComparisonReport(ResultModel):
    rows: list[ComparisonRow]
    losses: dict[str, dict[str, float]]
    dispatch_deltas: dict[str, float]

    def row(self, metric: str) -> ComparisonRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)
