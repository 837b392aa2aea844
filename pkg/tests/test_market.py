import numpy as np
import pytest
from scipy.optimize import linprog

from heatuc import compact
from heatuc.bidding import build_bid_book
from heatuc.errors import InfeasibleClearingError, ModelError
from heatuc.market import (
    check_cost_recovery,
    clear_electricity,
    clear_heat,
    curtailment,
    period_costs,
    run_sequential,
)

from .conftest import MICRO, build_case


def _dispatch(outcome, unit, t=0):
    return outcome.unit_dispatch(unit, t)


def test_heat_merit_order(micro_case):
    bids = build_bid_book(micro_case)
    out = clear_heat(micro_case, compact.all_on_plan(micro_case), bids)
    assert _dispatch(out, "HO1").heat == pytest.approx(50.0)
    assert _dispatch(out, "HO2").heat == pytest.approx(20.0)
    assert out.price_at("h1", 0) == pytest.approx(20.0, abs=1e-6)
    assert out.objective == pytest.approx(900.0)
    assert out.balance_residual <= 1e-6


def test_heat_clearing_respects_commitment():
    case = build_case(loads={"electricity": MICRO["loads"]["electricity"], "heat": {"series": {"h1": [40.0]}}})
    plan = compact.plan_from_status(case, {"HO1": [0], "HO2": [1]}, {"HO1": [[0]], "HO2": [[1]]})
    out = clear_heat(case, plan, build_bid_book(case))
    assert _dispatch(out, "HO1").heat == pytest.approx(0.0)
    assert _dispatch(out, "HO2").heat == pytest.approx(40.0)
    assert out.price_at("h1", 0) == pytest.approx(20.0, abs=1e-6)


def test_heat_clearing_short_of_committed_capacity(micro_case):
    plan = compact.plan_from_status(micro_case, {"HO1": [0], "HO2": [1]}, {"HO1": [[0]], "HO2": [[1]]})
    with pytest.raises(InfeasibleClearingError) as exc_info:
        clear_heat(micro_case, plan, build_bid_book(micro_case))
    assert exc_info.value.locations == ["h1"]


def test_heat_shortfall_names_period_and_network():
    case = build_case(loads={"electricity": MICRO["loads"]["electricity"], "heat": {"series": {"h1": [120.0]}}})
    with pytest.raises(InfeasibleClearingError) as exc_info:
        clear_heat(case, compact.all_on_plan(case), build_bid_book(case))
    assert exc_info.value.market == "heat"
    assert exc_info.value.periods == [0]
    assert exc_info.value.locations == ["h1"]


def test_pipe_congestion_splits_heat_prices():
    case = build_case(
        heat_nodes=[{"id": "h1"}, {"id": "h2"}],
        pipes=[{"id": "p12", "from_node": "h1", "to_node": "h2", "capacity": 30.0, "loss": 0.1}],
        units={
            "heat_only": [
                {"id": "HO1", "node_heat": "h1", "q_max": 100.0, "marginal_cost": 10.0},
                {"id": "HO2", "node_heat": "h2", "q_max": 100.0, "marginal_cost": 20.0},
            ],
            "thermal": MICRO["units"]["thermal"],
            "wind": MICRO["units"]["wind"],
        },
        bids={**MICRO["bids"], "heat": {"HO1": [{"quantity": 100.0}], "HO2": [{"quantity": 100.0}]}},
        loads={"electricity": MICRO["loads"]["electricity"], "heat": {"series": {"h1": [10.0], "h2": [40.0]}}},
    )
    out = clear_heat(case, compact.all_on_plan(case), build_bid_book(case))
    assert _dispatch(out, "HO1").heat == pytest.approx(40.0)
    assert _dispatch(out, "HO2").heat == pytest.approx(13.0)
    assert out.flows[0].flow == pytest.approx(30.0)
    assert out.price_at("h1", 0) == pytest.approx(10.0, abs=1e-6)
    assert out.price_at("h2", 0) == pytest.approx(20.0, abs=1e-6)


def test_electricity_merit_order(micro_case):
    out = clear_electricity(micro_case, {})
    assert _dispatch(out, "W1").power == pytest.approx(80.0)
    assert _dispatch(out, "G1").power == pytest.approx(70.0)
    assert out.price_at("b1", 0) == pytest.approx(10.0, abs=1e-6)
    assert curtailment(micro_case, out)[0].curtailed == pytest.approx(0.0, abs=1e-6)


def test_wind_surplus_is_curtailed_at_zero_price():
    case = build_case(wind={"series": {"W1": [200.0]}})
    out = clear_electricity(case, {})
    assert _dispatch(out, "W1").power == pytest.approx(150.0)
    assert _dispatch(out, "G1").power == pytest.approx(0.0, abs=1e-6)
    assert out.price_at("b1", 0) == pytest.approx(0.0, abs=1e-6)
    curt = curtailment(case, out)[0]
    assert curt.curtailed == pytest.approx(50.0)
    assert curt.percent == pytest.approx(25.0)


def test_line_congestion_splits_lmps():
    case = build_case(
        buses=[{"id": "b1", "reference": True}, {"id": "b2"}],
        lines=[{"id": "l12", "from_bus": "b1", "to_bus": "b2", "susceptance": 10.0, "capacity": 50.0}],
        heat_nodes=[],
        units={"thermal": [{"id": "G1", "node_power": "b1"}, {"id": "G2", "node_power": "b2"}]},
        bids={"electricity": {"G1": [{"price": 10.0, "quantity": 200.0}],
                              "G2": [{"price": 30.0, "quantity": 200.0}]}},
        loads={"electricity": {"series": {"b2": [100.0]}}},
        wind={},
    )
    out = clear_electricity(case, {})
    assert _dispatch(out, "G1").power == pytest.approx(50.0)
    assert _dispatch(out, "G2").power == pytest.approx(50.0)
    assert out.price_at("b1", 0) == pytest.approx(10.0, abs=1e-6)
    assert out.price_at("b2", 0) == pytest.approx(30.0, abs=1e-6)
    assert out.flows[0].flow == pytest.approx(50.0)


def test_period_subset(oracle_case, oracle_bids):
    plan = compact.all_on_plan(oracle_case)
    out = clear_heat(oracle_case, plan, oracle_bids, [2])
    assert out.periods == [2]
    assert {d.period for d in out.dispatch} == {2}
    with pytest.raises(ModelError):
        clear_heat(oracle_case, plan, oracle_bids, [9])


def test_heat_pump_bid_below_realised_cost_is_flagged(oracle_case, oracle_bids):
    plan = compact.all_on_plan(oracle_case)
    seq = run_sequential(oracle_case, plan, oracle_bids)
    assert seq.heat.unit_dispatch("HP1", 1).heat == pytest.approx(30.0)
    assert seq.electricity.price_at("b2", 1) == pytest.approx(5.47, abs=1e-6)

    report = check_cost_recovery(oracle_case, seq)
    bad = [e for e in report.violations if e.unit == "HP1" and e.period == 1]
    assert [e.block for e in bad] == [0, 1]
    assert bad[0].marginal_cost == pytest.approx(5.47 / 3, abs=1e-6)
    assert bad[0].loss == pytest.approx(15.0 * 5.47 / 3, abs=1e-4)
    assert report.loss_by_unit()["HP1"] > 0


def test_period_costs(oracle_case, oracle_bids):
    plan = compact.all_on_plan(oracle_case)
    seq = run_sequential(oracle_case, plan, oracle_bids)
    costs = {c.period: c for c in period_costs(oracle_case, plan, seq)}
    # no-load 5 + 1 + 3, start-ups 20 + 2 + 10 at the first period
    assert costs[0].commitment == pytest.approx(41.0)
    assert costs[1].commitment == pytest.approx(9.0)
    heat_only = sum(a.price * a.accepted for a in seq.heat.accepted if a.period == 1 and a.unit != "HP1")
    assert costs[1].heat == pytest.approx(heat_only)
    assert costs[1].overall == pytest.approx(costs[1].commitment + costs[1].heat + costs[1].electricity)


def _random_grid(seed):
    rng = np.random.default_rng(seed)
    buses = ["b1", "b2", "b3"]
    blocks = {}
    for i, bus in enumerate(buses, start=1):
        prices = np.sort(rng.uniform(5.0, 50.0, 2))
        blocks[f"G{i}"] = [{"price": float(p), "quantity": float(q)}
                           for p, q in zip(prices, rng.uniform(50.0, 100.0, 2))]
    lines = [
        {"id": f"l{a[1:]}{b[1:]}", "from_bus": a, "to_bus": b,
         "susceptance": float(rng.uniform(5.0, 20.0)), "capacity": float(rng.uniform(10.0, 60.0))}
        for a, b in (("b1", "b2"), ("b2", "b3"), ("b1", "b3"))
    ]
    return build_case(
        buses=[{"id": "b1", "reference": True}, {"id": "b2"}, {"id": "b3"}],
        lines=lines,
        heat_nodes=[],
        units={"thermal": [{"id": f"G{i}", "node_power": b} for i, b in enumerate(buses, start=1)],
               "wind": [{"id": "W1", "node_power": "b3"}]},
        bids={"electricity": blocks},
        loads={"electricity": {"series": {b: [float(rng.uniform(20.0, 80.0))] for b in buses}}},
        wind={"series": {"W1": [float(rng.uniform(0.0, 60.0))]}},
    )


def _linprog_dcopf(case):
    """Independent DC-OPF: block outputs, wind, then angles of the non-reference buses."""
    buses = [b.id for b in case.buses]
    cols = [(g.id, k, g.node_power) for g in case.units.thermal for k in range(len(case.electricity_blocks(g.id)))]
    n_gen, angles = len(cols), [b for b in buses if b != case.reference_bus]
    n = n_gen + 1 + len(angles)
    cost = np.zeros(n)
    bounds = []
    for i, (g, k, _) in enumerate(cols):
        blk = case.electricity_blocks(g)[k]
        cost[i] = blk.price
        bounds.append((0.0, blk.quantity))
    bounds.append((0.0, case.wind_available("W1")[0]))
    bounds += [(None, None)] * len(angles)

    def flow_row(line):
        row = np.zeros(n)
        if line.from_bus in angles:
            row[n_gen + 1 + angles.index(line.from_bus)] += line.susceptance
        if line.to_bus in angles:
            row[n_gen + 1 + angles.index(line.to_bus)] -= line.susceptance
        return row

    a_eq, b_eq = [], []
    for bus in buses:
        row = np.zeros(n)
        for i, (_, _, at) in enumerate(cols):
            if at == bus:
                row[i] = 1.0
        if case.unit("W1").node_power == bus:
            row[n_gen] = 1.0
        for line in case.lines:
            if line.from_bus == bus:
                row -= flow_row(line)
            if line.to_bus == bus:
                row += flow_row(line)
        a_eq.append(row)
        b_eq.append(case.electric_load(bus)[0])
    a_ub = [flow_row(line) for line in case.lines] + [-flow_row(line) for line in case.lines]
    b_ub = [line.capacity for line in case.lines] * 2
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    assert res.status == 0
    return res.fun


@pytest.mark.parametrize("seed", range(50))
def test_electricity_clearing_duality_and_optimality(seed):
    case = _random_grid(seed)
    out = clear_electricity(case, {})
    scale = max(1.0, abs(out.lp_objective))
    assert abs(out.lp_objective - out.dual_objective) <= 1e-6 * scale
    assert out.balance_residual <= 1e-6
    assert out.objective == pytest.approx(_linprog_dcopf(case), rel=1e-6, abs=1e-4)
    for a in out.accepted:
        if 1e-6 < a.accepted < a.quantity - 1e-6:
            # a block strictly inside its bounds is marginal at its bus
            assert a.price == pytest.approx(out.price_at(case.unit(a.unit).node_power, a.period), abs=1e-6)


@pytest.mark.parametrize("seed", range(50))
def test_heat_clearing_matches_greedy_merit_order(seed):
    rng = np.random.default_rng(1000 + seed)
    costs = rng.uniform(5.0, 40.0, 4)
    sizes = rng.uniform(10.0, 40.0, 4)
    load = float(rng.uniform(0.2, 0.9) * sizes.sum())
    units = [{"id": f"HO{i}", "node_heat": "h1", "q_max": float(q), "marginal_cost": float(c)}
             for i, (c, q) in enumerate(zip(costs, sizes))]
    case = build_case(
        units={**MICRO["units"], "heat_only": units},
        bids={**MICRO["bids"], "heat": {u["id"]: [{"quantity": u["q_max"]}] for u in units}},
        loads={"electricity": MICRO["loads"]["electricity"], "heat": {"series": {"h1": [load]}}},
    )
    out = clear_heat(case, compact.all_on_plan(case), build_bid_book(case))

    expected, remaining = 0.0, load
    for i in np.argsort(costs, kind="stable"):
        take = min(remaining, sizes[i])
        expected += take * costs[i]
        remaining -= take
    assert out.objective == pytest.approx(expected, rel=1e-7)
    assert abs(out.lp_objective - out.dual_objective) <= 1e-6 * max(1.0, abs(out.lp_objective))
