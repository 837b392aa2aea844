"""Canonical rows of the heat and electricity markets.

Every market is written as rows `coeffs . x (>= | ==) rhs + rhs_z . z`
over columns that are either nonnegative or free. The commitment vector
z only enters right-hand sides, so the heat matrix does not depend on z
and fixing z turns any row into a plain LP row. The same rows feed the
market clearings, the decoupled UC and the dualised aware model.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .config import settings
from .errors import ModelError
from .models import AdjustedElectricityPosition, BidBook, CommitmentPlan
from .schemas import Case
from .solver import ModelHandle

HEAT, ELECTRICITY, UC = "H", "E", "UC"


def u_name(j: str, t: int) -> str:
    return f"u[{j},{t}]"


def von_name(j: str, t: int) -> str:
    return f"von[{j},{t}]"


def voff_name(j: str, t: int) -> str:
    return f"voff[{j},{t}]"


def sel_name(j: str, b: int, t: int) -> str:
    return f"sel[{j},{b},{t}]"


def heat_col(j: str, b: int, t: int) -> str:
    return f"sH[{j},{b},{t}]"


def pipe_col(p: str, t: int, direction: str) -> str:
    return f"fH[{p},{t},{direction}]"


def elec_col(g: str, k: int, t: int) -> str:
    return f"sE[{g},{k},{t}]"


def wind_col(w: str, t: int) -> str:
    return f"w[{w},{t}]"


def chp_power_col(j: str, t: int) -> str:
    return f"pE[{j},{t}]"


def flex_col(j: str, t: int) -> str:
    return f"pflex[{j},{t}]"


def theta_col(n: str, t: int) -> str:
    return f"theta[{n},{t}]"


@dataclass
class LinearRow:
    name: str
    level: str
    coeffs: dict[str, float]
    sense: str
    rhs: float
    rhs_z: dict[str, float] = field(default_factory=dict)
    kind: str = ""
    key: tuple = ()

    def rhs_at(self, z: dict[str, float]) -> float:
        return self.rhs + sum(c * z.get(k, 0.0) for k, c in self.rhs_z.items())


@dataclass(frozen=True)
class BlockRef:
    unit: str
    block: int
    period: int
    price: float
    quantity: float


@dataclass
class Part:
    """Columns, costs and rows of one market (or of the UC polytope)."""

    level: str
    columns: dict[str, Optional[float]] = field(default_factory=dict)  # name -> lower bound (0.0 or None)
    cost: dict[str, float] = field(default_factory=dict)
    price: dict[str, float] = field(default_factory=dict)
    rows: list[LinearRow] = field(default_factory=list)
    blocks: dict[str, BlockRef] = field(default_factory=dict)
    balance: dict[tuple[str, int], str] = field(default_factory=dict)
    flows: dict[tuple[str, int], dict[str, float]] = field(default_factory=dict)

    def add_row(self, name, coeffs, sense, rhs, rhs_z=None, kind="", key=()):
        rhs_z = {k: c for k, c in (rhs_z or {}).items() if c != 0.0}
        self.rows.append(LinearRow(name, self.level, dict(coeffs), sense, float(rhs), rhs_z, kind, key))


@dataclass
class CompactModel:
    """Block structure of the heat UC with its two market levels.

    `uc` holds z and the UC polytope (rows over z only), `heat` the heat
    market A^H x^H >= b^H + B^H z and `electricity` the electricity market,
    whose rows also touch heat columns (CHP coupling, heat-pump demand).
    """

    periods: list[int]
    z: list[str]
    c0: dict[str, float]
    uc: Part
    heat: Part
    electricity: Part

    @property
    def market_rows(self) -> list[LinearRow]:
        return [*self.heat.rows, *self.electricity.rows]

    @property
    def market_columns(self) -> dict[str, Optional[float]]:
        return {**self.heat.columns, **self.electricity.columns}

    def matrices(self) -> dict[str, sparse.csr_matrix | np.ndarray]:
        """Sparse block matrices and vectors of the compact form."""
        xh = {c: i for i, c in enumerate(self.heat.columns)}
        xe = {c: i for i, c in enumerate(self.electricity.columns)}
        zi = {c: i for i, c in enumerate(self.z)}

        def block(rows, index):
            data, ri, ci = [], [], []
            for r, row in enumerate(rows):
                for v, c in row.coeffs.items():
                    if v in index:
                        data.append(c)
                        ri.append(r)
                        ci.append(index[v])
            return sparse.coo_matrix((data, (ri, ci)), shape=(len(rows), len(index))).tocsr()

        def zblock(rows):
            data, ri, ci = [], [], []
            for r, row in enumerate(rows):
                for k, c in row.rhs_z.items():
                    data.append(-c)
                    ri.append(r)
                    ci.append(zi[k])
            return sparse.coo_matrix((data, (ri, ci)), shape=(len(rows), len(zi))).tocsr()

        H, E = self.heat.rows, self.electricity.rows
        return {
            "A_UC": block(self.uc.rows, zi),
            "b_UC": np.array([r.rhs for r in self.uc.rows]),
            "A_H": block(H, xh),
            "B_H": zblock(H),
            "b_H": np.array([r.rhs for r in H]),
            "A_E_heat": block(E, xh),
            "A_E": block(E, xe),
            "B_E": zblock(E),
            "b_E": np.array([r.rhs for r in E]),
            "c0": np.array([self.c0.get(k, 0.0) for k in self.z]),
            "c_H": np.array([self.heat.cost.get(c, 0.0) for c in self.heat.columns]),
            "c_E": np.array([self.electricity.cost.get(c, 0.0) for c in self.electricity.columns]),
        }


def resolve_periods(case: Case, periods: Optional[Sequence[int]]) -> list[int]:
    if periods is None:
        return list(case.periods)
    periods = sorted(set(periods))
    unknown = [t for t in periods if t not in case.periods]
    if unknown:
        raise ModelError(f"periods {unknown} outside the horizon")
    if len(periods) != len(case.periods) and any(p.delay > 0 for p in case.pipes):
        raise ModelError("period subsets require zero pipe delays")
    return periods


def _ranks(keys: list[tuple[str, int]]) -> dict[tuple[str, int], int]:
    return {k: i + 1 for i, k in enumerate(sorted(keys))}


def uc_part(case: Case, periods: Optional[Sequence[int]] = None) -> tuple[list[str], dict[str, float], Part]:
    """z vector, commitment cost c^0 and the UC polytope.

    On a period subset the first period starts from the initial status.
    """
    part = Part(UC)
    z: list[str] = []
    c0: dict[str, float] = {}
    periods = resolve_periods(case, periods)
    for unit in case.heat_units:
        j = unit.id
        n_blocks = len(case.heat_blocks(j))
        for t in periods:
            z += [u_name(j, t), von_name(j, t), voff_name(j, t)]
            z += [sel_name(j, b, t) for b in range(n_blocks)]
            c0[u_name(j, t)] = unit.no_load_cost
            c0[von_name(j, t)] = unit.startup_cost
        for i, t in enumerate(periods):
            coeffs = {von_name(j, t): 1.0, voff_name(j, t): -1.0, u_name(j, t): -1.0}
            rhs = 0.0
            if i == 0:
                rhs = -1.0 if unit.initial_on else 0.0
            else:
                coeffs[u_name(j, periods[i - 1])] = 1.0
            part.add_row(f"transition[{j},{t}]", coeffs, "==", rhs, kind="transition", key=(j, t))
            part.add_row(f"one_switch[{j},{t}]", {von_name(j, t): -1.0, voff_name(j, t): -1.0}, ">=", -1.0,
                         kind="one_switch", key=(j, t))
            window = periods[max(0, i - unit.min_up + 1): i + 1]
            up = {u_name(j, t): 1.0}
            for tau in window:
                up[von_name(j, tau)] = up.get(von_name(j, tau), 0.0) - 1.0
            part.add_row(f"min_up[{j},{t}]", up, ">=", 0.0, kind="min_up", key=(j, t))
            window = periods[max(0, i - unit.min_down + 1): i + 1]
            down = {u_name(j, t): -1.0}
            for tau in window:
                down[voff_name(j, tau)] = -1.0
            part.add_row(f"min_down[{j},{t}]", down, ">=", -1.0, kind="min_down", key=(j, t))
            if n_blocks:
                part.add_row(f"sel_on[{j},{t}]", {u_name(j, t): 1.0, sel_name(j, 0, t): -1.0}, ">=", 0.0,
                             kind="sel_on", key=(j, t))
            for b in range(n_blocks - 1):
                part.add_row(f"sel_order[{j},{b},{t}]", {sel_name(j, b, t): 1.0, sel_name(j, b + 1, t): -1.0},
                             ">=", 0.0, kind="sel_order", key=(j, b, t))
    return z, c0, part


def heat_part(case: Case, bids: BidBook, periods: Optional[Sequence[int]] = None,
              eps: Optional[float] = None) -> Part:
    periods = resolve_periods(case, periods)
    eps = settings.TIE_BREAK_EPS if eps is None else eps
    part = Part(HEAT)
    ranks = _ranks([(u.id, b) for u in case.heat_units for b in range(len(case.heat_blocks(u.id)))])

    inflow: dict[tuple[str, int], dict[str, float]] = {}
    for unit in case.heat_units:
        j = unit.id
        ladder = bids[j]
        for t in periods:
            for b in range(len(case.heat_blocks(j))):
                col = heat_col(j, b, t)
                price, qty = ladder.price(b, t), ladder.quantity(b, t)
                part.columns[col] = 0.0
                part.price[col] = price
                part.cost[col] = price + eps * ranks[(j, b)]
                part.blocks[col] = BlockRef(j, b, t, price, qty)
                part.add_row(f"heat_cap[{j},{b},{t}]", {col: -1.0}, ">=", 0.0, {sel_name(j, b, t): -qty},
                             kind="heat_cap", key=(j, b, t))
                inflow.setdefault((unit.node_heat, t), {})[col] = 1.0

    for pipe in case.pipes:
        for t in periods:
            for direction, src, dst in (("fwd", pipe.from_node, pipe.to_node), ("rev", pipe.to_node, pipe.from_node)):
                col = pipe_col(pipe.id, t, direction)
                part.columns[col] = 0.0
                part.add_row(f"pipe_cap[{pipe.id},{t},{direction}]", {col: -1.0}, ">=", -pipe.capacity,
                             kind="pipe_cap", key=(pipe.id, t, direction))
                out = inflow.setdefault((src, t), {})
                out[col] = out.get(col, 0.0) - 1.0
                if t + pipe.delay in periods:
                    arrive = inflow.setdefault((dst, t + pipe.delay), {})
                    arrive[col] = arrive.get(col, 0.0) + (1.0 - pipe.loss)
            part.flows[(pipe.id, t)] = {pipe_col(pipe.id, t, "fwd"): 1.0, pipe_col(pipe.id, t, "rev"): -1.0}

    for node in case.heat_nodes:
        load = case.heat_load(node.id)
        for t in periods:
            name = f"heat_balance[{node.id},{t}]"
            part.add_row(name, inflow.get((node.id, t), {}), "==", load[case.index(t)],
                         kind="heat_balance", key=(node.id, t))
            part.balance[(node.id, t)] = name
    return part


def electricity_part(case: Case, periods: Optional[Sequence[int]] = None, eps: Optional[float] = None,
                     positions: Optional[dict[str, AdjustedElectricityPosition]] = None) -> Part:
    """Electricity market rows.

    Without `positions` the CHP output and heat-pump demand are tied to the
    heat columns (coupled form used by the aware model). With `positions`
    they are the fixed self-commitments and flexible blocks derived from a
    heat clearing.
    """
    periods = resolve_periods(case, periods)
    eps = settings.TIE_BREAK_EPS if eps is None else eps
    part = Part(ELECTRICITY)
    keys = [(g.id, k) for g in case.units.thermal for k in range(len(case.electricity_blocks(g.id)))]
    keys += [(w.id, 0) for w in case.units.wind] + [(j.id, 0) for j in case.units.chp]
    ranks = _ranks(keys)
    ref = case.reference_bus

    injection: dict[tuple[str, int], dict[str, float]] = {}
    shift: dict[tuple[str, int], float] = {}

    def inject(bus, t, col, coef=1.0):
        terms = injection.setdefault((bus, t), {})
        terms[col] = terms.get(col, 0.0) + coef

    for g in case.units.thermal:
        for k, blk in enumerate(case.electricity_blocks(g.id)):
            for t in periods:
                col = elec_col(g.id, k, t)
                part.columns[col] = 0.0
                part.price[col] = blk.price
                part.cost[col] = blk.price + eps * ranks[(g.id, k)]
                part.blocks[col] = BlockRef(g.id, k, t, blk.price, blk.quantity)
                part.add_row(f"elec_cap[{g.id},{k},{t}]", {col: -1.0}, ">=", -blk.quantity,
                             kind="elec_cap", key=(g.id, k, t))
                inject(g.node_power, t, col)

    for w in case.units.wind:
        avail = case.wind_available(w.id)
        for t in periods:
            col = wind_col(w.id, t)
            part.columns[col] = 0.0
            part.price[col] = 0.0
            part.cost[col] = eps * ranks[(w.id, 0)]
            part.blocks[col] = BlockRef(w.id, 0, t, 0.0, avail[case.index(t)])
            part.add_row(f"wind_cap[{w.id},{t}]", {col: -1.0}, ">=", -avail[case.index(t)],
                         kind="wind_cap", key=(w.id, t))
            inject(w.node_power, t, col)

    for chp in case.units.chp:
        j = chp.id
        n_blocks = len(case.heat_blocks(j))
        for t in periods:
            if positions is None:
                col = chp_power_col(j, t)
                heat = [heat_col(j, b, t) for b in range(n_blocks)]
                part.columns[col] = 0.0
                part.price[col] = chp.electricity_cost
                part.cost[col] = chp.electricity_cost + eps * ranks[(j, 0)]
                part.add_row(f"chp_ratio[{j},{t}]", {col: 1.0, **{h: -chp.r for h in heat}}, ">=", 0.0,
                             kind="chp_ratio", key=(j, t))
                part.add_row(f"chp_fuel_min[{j},{t}]", {col: chp.rho_e, **{h: chp.rho_h for h in heat}}, ">=", 0.0,
                             {u_name(j, t): chp.f_min}, kind="chp_fuel_min", key=(j, t))
                part.add_row(f"chp_fuel_max[{j},{t}]", {col: -chp.rho_e, **{h: -chp.rho_h for h in heat}}, ">=", 0.0,
                             {u_name(j, t): -chp.f_max}, kind="chp_fuel_max", key=(j, t))
                inject(chp.node_power, t, col)
            else:
                step = positions[j].steps[t]
                shift[(chp.node_power, t)] = shift.get((chp.node_power, t), 0.0) + step.self_commit
                col = flex_col(j, t)
                part.columns[col] = 0.0
                part.price[col] = step.flex_price
                part.cost[col] = step.flex_price + eps * ranks[(j, 0)]
                part.blocks[col] = BlockRef(j, 0, t, step.flex_price, step.flex_quantity)
                part.add_row(f"chp_flex[{j},{t}]", {col: -1.0}, ">=", -step.flex_quantity, kind="chp_flex", key=(j, t))
                inject(chp.node_power, t, col)

    for hp in case.units.heat_pump:
        for t in periods:
            if positions is None:
                for b in range(len(case.heat_blocks(hp.id))):
                    inject(hp.node_power, t, heat_col(hp.id, b, t), -1.0 / hp.cop)
            else:
                step = positions[hp.id].steps[t]
                shift[(hp.node_power, t)] = shift.get((hp.node_power, t), 0.0) + step.self_commit

    for bus in case.buses:
        if bus.id != ref:
            for t in periods:
                part.columns[theta_col(bus.id, t)] = None

    for line in case.lines:
        for t in periods:
            flow = {}
            if line.from_bus != ref:
                flow[theta_col(line.from_bus, t)] = line.susceptance
            if line.to_bus != ref:
                flow[theta_col(line.to_bus, t)] = -line.susceptance
            part.flows[(line.id, t)] = flow
            part.add_row(f"line_fwd[{line.id},{t}]", {c: -v for c, v in flow.items()}, ">=", -line.capacity,
                         kind="line_limit", key=(line.id, t, "fwd"))
            part.add_row(f"line_rev[{line.id},{t}]", dict(flow), ">=", -line.capacity,
                         kind="line_limit", key=(line.id, t, "rev"))
            for c, v in flow.items():
                # flow leaves from_bus and enters to_bus
                inject(line.from_bus, t, c, -v)
                inject(line.to_bus, t, c, v)

    for bus in case.buses:
        load = case.electric_load(bus.id)
        for t in periods:
            name = f"elec_balance[{bus.id},{t}]"
            rhs = load[case.index(t)] - shift.get((bus.id, t), 0.0)
            part.add_row(name, injection.get((bus.id, t), {}), "==", rhs, kind="elec_balance", key=(bus.id, t))
            part.balance[(bus.id, t)] = name
    return part


def build_compact(case: Case, bids: BidBook, eps: Optional[float] = None,
                  periods: Optional[Sequence[int]] = None) -> CompactModel:
    periods = resolve_periods(case, periods)
    z, c0, uc = uc_part(case, periods)
    return CompactModel(
        periods=periods,
        z=z,
        c0=c0,
        uc=uc,
        heat=heat_part(case, bids, periods, eps=eps),
        electricity=electricity_part(case, periods, eps=eps),
    )


def lp_handle(name: str, parts: Sequence[Part], z: dict[str, float],
              weights: Optional[Sequence[float]] = None) -> ModelHandle:
    """LP over the given parts with z fixed into the right-hand sides."""
    weights = weights or [1.0] * len(parts)
    handle = ModelHandle(name)
    objective: dict[str, float] = {}
    for part, weight in zip(parts, weights):
        for col, lb in part.columns.items():
            handle.add_var(col, lb=lb)
        for col, c in part.cost.items():
            objective[col] = objective.get(col, 0.0) + weight * c
    for part in parts:
        for row in part.rows:
            handle.add_row(row.name, row.coeffs, row.sense, row.rhs_at(z))
    handle.set_objective(objective)
    return handle


def z_from_plan(case: Case, plan: CommitmentPlan) -> dict[str, float]:
    z: dict[str, float] = {}
    for unit in case.heat_units:
        j = unit.id
        for i, t in enumerate(plan.periods):
            z[u_name(j, t)] = float(plan.on[j][i])
            z[von_name(j, t)] = float(plan.startup[j][i])
            z[voff_name(j, t)] = float(plan.shutdown[j][i])
            for b, row in enumerate(plan.selected[j]):
                z[sel_name(j, b, t)] = float(row[i])
    return z


def plan_from_status(case: Case, on: dict[str, list[int]], selected: dict[str, list[list[int]]]) -> CommitmentPlan:
    """Commitment plan with start-ups, shut-downs and their costs derived from the status."""
    startup, shutdown, cost = {}, {}, {}
    for unit in case.heat_units:
        j = unit.id
        prev = 1 if unit.initial_on else 0
        startup[j], shutdown[j], cost[j] = [], [], []
        for status in on[j]:
            startup[j].append(int(status > prev))
            shutdown[j].append(int(status < prev))
            cost[j].append(unit.startup_cost * int(status > prev))
            prev = status
    return CommitmentPlan(
        periods=list(case.periods),
        on={j: [int(v) for v in on[j]] for j in sorted(on)},
        startup=startup,
        shutdown=shutdown,
        startup_cost=cost,
        selected={j: [[int(v) for v in row] for row in selected[j]] for j in sorted(selected)},
        delays={p.id: p.delay for p in case.pipes},
    )


def plan_from_z(case: Case, z: dict[str, float]) -> CommitmentPlan:
    on, selected = {}, {}
    for unit in case.heat_units:
        j = unit.id
        on[j] = [int(round(z[u_name(j, t)])) for t in case.periods]
        selected[j] = [[int(round(z[sel_name(j, b, t)])) for t in case.periods]
                       for b in range(len(case.heat_blocks(j)))]
    return plan_from_status(case, on, selected)


def all_on_plan(case: Case) -> CommitmentPlan:
    """Every heat unit committed with every block selected."""
    T = len(case.periods)
    on = {u.id: [1] * T for u in case.heat_units}
    selected = {u.id: [[1] * T for _ in case.heat_blocks(u.id)] for u in case.heat_units}
    return plan_from_status(case, on, selected)
