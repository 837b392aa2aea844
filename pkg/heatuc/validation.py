import logging
from dataclasses import dataclass

import networkx as nx

from .config import settings
from .errors import CaseValidationError
from .models import CommitmentPlan
from .schemas import Case, ExtractionChp, ProfileSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def for_contains(chp: ExtractionChp, p: float, q: float, on: bool, tol: float | None = None) -> bool:
    """True iff (p, q) lies in the CHP operating region for the given status."""
    tol = settings.FEASIBILITY_TOL if tol is None else tol
    u = 1.0 if on else 0.0
    fuel = chp.rho_h * q + chp.rho_e * p
    return (
        p >= chp.r * q - tol
        and u * chp.f_min - tol <= fuel <= u * chp.f_max + tol
    )


def _duplicates(ids: list[str]) -> set[str]:
    seen, dup = set(), set()
    for i in ids:
        (dup if i in seen else seen).add(i)
    return dup


def _check_series(out: list, path: str, values: list[float], length: int):
    if len(values) != length:
        out.append(Violation(path, f"series length {len(values)} differs from horizon length {length}"))
    if any(v < 0 for v in values):
        out.append(Violation(path, "negative value in series"))


def _check_profile_set(out: list, path: str, profile: ProfileSet, known: set[str], length: int, what: str):
    for key, series in profile.series.items():
        if key not in known:
            out.append(Violation(f"{path}.series.{key}", f"unknown {what} '{key}'"))
        _check_series(out, f"{path}.series.{key}", series, length)
    for key, share in profile.shares.items():
        if key not in known:
            out.append(Violation(f"{path}.shares.{key}", f"unknown {what} '{key}'"))
        if share < 0:
            out.append(Violation(f"{path}.shares.{key}", "negative share"))
    if profile.shares and profile.profile is None:
        out.append(Violation(f"{path}.profile", "shares given without a profile"))
    if profile.profile is not None:
        _check_series(out, f"{path}.profile", profile.profile, length)


def validate_case(case: Case) -> list[Violation]:
    """Check every physical and economic invariant; return all violations."""
    out: list[Violation] = []
    periods = case.horizon.periods
    T = len(periods)

    if not periods:
        out.append(Violation("horizon.periods", "empty horizon"))
    elif periods != list(range(periods[0], periods[0] + T)):
        out.append(Violation("horizon.periods", "periods are not contiguous"))

    bus_ids = [b.id for b in case.buses]
    buses = set(bus_ids)
    node_ids = [n.id for n in case.heat_nodes]
    nodes = set(node_ids)
    if not bus_ids:
        out.append(Violation("buses", "no buses"))
    for dup in sorted(_duplicates(bus_ids)):
        out.append(Violation("buses", f"duplicate bus id '{dup}'"))
    for dup in sorted(_duplicates(node_ids)):
        out.append(Violation("heat_nodes", f"duplicate heat node id '{dup}'"))
    if sum(b.reference for b in case.buses) > 1:
        out.append(Violation("buses", "more than one reference bus"))

    for dup in sorted(_duplicates([l.id for l in case.lines])):
        out.append(Violation("lines", f"duplicate line id '{dup}'"))
    for i, line in enumerate(case.lines):
        path = f"lines[{i}]"
        for end in ("from_bus", "to_bus"):
            if getattr(line, end) not in buses:
                out.append(Violation(f"{path}.{end}", f"unknown bus '{getattr(line, end)}'"))
        if line.from_bus == line.to_bus:
            out.append(Violation(path, "line connects a bus to itself"))
        if line.susceptance <= 0:
            out.append(Violation(f"{path}.susceptance", "non-positive susceptance"))
        if line.capacity <= 0:
            out.append(Violation(f"{path}.capacity", "non-positive line capacity"))
    if bus_ids and not nx.is_connected(case.power_graph()):
        out.append(Violation("lines", "power network is not connected"))

    for dup in sorted(_duplicates([p.id for p in case.pipes])):
        out.append(Violation("pipes", f"duplicate pipe id '{dup}'"))
    for i, pipe in enumerate(case.pipes):
        path = f"pipes[{i}]"
        for end in ("from_node", "to_node"):
            if getattr(pipe, end) not in nodes:
                out.append(Violation(f"{path}.{end}", f"unknown heat node '{getattr(pipe, end)}'"))
        if pipe.from_node == pipe.to_node:
            out.append(Violation(path, "pipe connects a node to itself"))
        if pipe.capacity <= 0:
            out.append(Violation(f"{path}.capacity", "non-positive pipe capacity"))
        if not 0.0 <= pipe.loss < 1.0:
            out.append(Violation(f"{path}.loss", "loss coefficient outside [0, 1)"))
        if pipe.delay < 0 or (T and pipe.delay >= T):
            out.append(Violation(f"{path}.delay", "delay outside [0, horizon length)"))

    all_units = [*case.units.chp, *case.units.heat_pump, *case.units.heat_only,
                 *case.units.thermal, *case.units.wind]
    for dup in sorted(_duplicates([u.id for u in all_units])):
        out.append(Violation("units", f"duplicate unit id '{dup}'"))

    groups = (("chp", case.units.chp), ("heat_pump", case.units.heat_pump), ("heat_only", case.units.heat_only))
    for group, units in groups:
        for i, unit in enumerate(units):
            path = f"units.{group}[{i}]"
            if unit.node_heat not in nodes:
                out.append(Violation(f"{path}.node_heat", f"unknown heat node '{unit.node_heat}'"))
            if hasattr(unit, "node_power") and unit.node_power not in buses:
                out.append(Violation(f"{path}.node_power", f"unknown bus '{unit.node_power}'"))
            if unit.min_up < 1 or unit.min_down < 1:
                out.append(Violation(path, "minimum up/down times must be at least one period"))
            if unit.no_load_cost < 0 or unit.startup_cost < 0:
                out.append(Violation(path, "negative commitment cost"))

    for i, chp in enumerate(case.units.chp):
        path = f"units.chp[{i}]"
        if chp.r < 0:
            out.append(Violation(f"{path}.r", "negative heat-to-power ratio"))
        if chp.rho_e <= 0:
            out.append(Violation(f"{path}.rho_e", "non-positive electricity fuel efficiency"))
        if chp.rho_h <= 0:
            out.append(Violation(f"{path}.rho_h", "non-positive heat fuel efficiency"))
        if chp.f_min < 0:
            out.append(Violation(f"{path}.f_min", "negative minimum fuel"))
        if chp.f_min >= chp.f_max:
            out.append(Violation(f"{path}.f_max", "empty fuel interval"))
        if chp.fuel_cost < 0:
            out.append(Violation(f"{path}.fuel_cost", "negative fuel cost"))
        elif chp.rho_e > 0 and chp.f_max >= chp.f_min >= 0 and not for_contains(chp, chp.f_min / chp.rho_e, 0.0, True):
            out.append(Violation(path, "empty operating region"))

    for i, hp in enumerate(case.units.heat_pump):
        path = f"units.heat_pump[{i}]"
        if hp.cop <= 1:
            out.append(Violation(f"{path}.cop", "coefficient of performance must exceed 1"))
        if hp.q_max <= 0:
            out.append(Violation(f"{path}.q_max", "non-positive heat capacity"))

    for i, ho in enumerate(case.units.heat_only):
        path = f"units.heat_only[{i}]"
        if ho.q_max <= 0:
            out.append(Violation(f"{path}.q_max", "non-positive heat capacity"))
        if ho.marginal_cost < 0:
            out.append(Violation(f"{path}.marginal_cost", "negative marginal cost"))

    for unit in [*case.units.thermal, *case.units.wind]:
        if unit.node_power not in buses:
            out.append(Violation(f"units.{unit.id}.node_power", f"unknown bus '{unit.node_power}'"))

    heat_unit_ids = {u.id for u in case.heat_units}
    for unit in case.heat_units:
        path = f"bids.heat.{unit.id}"
        spec = case.bids.heat.get(unit.id)
        if not spec:
            out.append(Violation(path, "empty block_spec"))
            continue
        if any(b.quantity < 0 for b in spec):
            out.append(Violation(path, "negative block quantity"))
        if any(b.markup < 0 for b in spec):
            out.append(Violation(path, "negative block markup"))
        if any(spec[k + 1].markup < spec[k].markup for k in range(len(spec) - 1)):
            out.append(Violation(path, "block markups must be nondecreasing"))
        total = sum(b.quantity for b in spec)
        if unit.heat_capability > 0 and total > unit.heat_capability + settings.FEASIBILITY_TOL:
            out.append(Violation(path, f"block quantities {total:g} exceed unit heat capability {unit.heat_capability:g}"))
    for key in case.bids.heat:
        if key not in heat_unit_ids:
            out.append(Violation(f"bids.heat.{key}", f"unknown heat unit '{key}'"))

    thermal_ids = {u.id for u in case.units.thermal}
    for key, blocks in case.bids.electricity.items():
        path = f"bids.electricity.{key}"
        if key not in thermal_ids:
            out.append(Violation(path, f"unknown thermal plant '{key}'"))
        if any(b.price < 0 or b.quantity < 0 for b in blocks):
            out.append(Violation(path, "bid blocks need nonnegative prices and quantities"))
        if any(blocks[k + 1].price < blocks[k].price for k in range(len(blocks) - 1)):
            out.append(Violation(path, "bid blocks are not sorted by price"))
    for unit in case.units.thermal:
        if not case.bids.electricity.get(unit.id):
            out.append(Violation(f"bids.electricity.{unit.id}", "thermal plant without bid blocks"))

    foreseen = case.bids.foreseen_lmps
    for bus, series in foreseen.by_bus.items():
        if bus not in buses:
            out.append(Violation(f"bids.foreseen_lmps.by_bus.{bus}", f"unknown bus '{bus}'"))
        if len(series) != T:
            out.append(Violation(f"bids.foreseen_lmps.by_bus.{bus}", "series length differs from horizon length"))
    if foreseen.default is not None and len(foreseen.default) != T:
        out.append(Violation("bids.foreseen_lmps.default", "series length differs from horizon length"))
    for unit in case.coupled_units:
        if foreseen.at(unit.node_power) is None:
            out.append(Violation("bids.foreseen_lmps", f"no foreseen LMPs for bus '{unit.node_power}' of unit '{unit.id}'"))

    _check_profile_set(out, "loads.electricity", case.loads.electricity, buses, T, "bus")
    _check_profile_set(out, "loads.heat", case.loads.heat, nodes, T, "heat node")
    _check_profile_set(out, "wind", case.wind, {w.id for w in case.units.wind}, T, "wind farm")

    if out:
        logger.debug("case %s: %d violations", case.name, len(out))
    return out


def ensure_valid(case: Case) -> Case:
    violations = validate_case(case)
    if violations:
        raise CaseValidationError(violations)
    return case


def plan_violations(case: Case, plan: CommitmentPlan) -> list[str]:
    """Invariant check of a commitment plan against the case's UC rules."""
    out: list[str] = []
    T = len(plan.periods)
    for unit in case.heat_units:
        j = unit.id
        on = plan.on.get(j)
        if on is None or len(on) != T:
            out.append(f"{j}: missing or short on/off series")
            continue
        prev = 1 if unit.initial_on else 0
        for i, t in enumerate(plan.periods):
            su, sd = plan.startup[j][i], plan.shutdown[j][i]
            if su - sd != on[i] - prev:
                out.append(f"{j}@{t}: start-up/shut-down inconsistent with status change")
            if su + sd > 1:
                out.append(f"{j}@{t}: simultaneous start-up and shut-down")
            expected = unit.startup_cost * su
            if abs(plan.startup_cost[j][i] - expected) > settings.FEASIBILITY_TOL:
                out.append(f"{j}@{t}: start-up cost {plan.startup_cost[j][i]:g} != {expected:g}")
            if sum(plan.startup[j][max(0, i - unit.min_up + 1): i + 1]) > on[i]:
                out.append(f"{j}@{t}: minimum up time violated")
            if sum(plan.shutdown[j][max(0, i - unit.min_down + 1): i + 1]) > 1 - on[i]:
                out.append(f"{j}@{t}: minimum down time violated")
            prev = on[i]
        rows = plan.selected.get(j, [])
        for b, row in enumerate(rows):
            for i, t in enumerate(plan.periods):
                if row[i] > on[i]:
                    out.append(f"{j}@{t}: block {b} selected while unit is off")
                if b + 1 < len(rows) and rows[b + 1][i] > row[i]:
                    out.append(f"{j}@{t}: block {b + 1} selected before block {b}")
    return out
