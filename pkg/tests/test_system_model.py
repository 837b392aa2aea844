import numpy as np
import pytest

from heatuc import compact
from heatuc.errors import CaseValidationError, UnknownUnitError
from heatuc.validation import for_contains, plan_violations, validate_case

from .conftest import MICRO, build_case


def test_micro_case_is_valid(micro_case):
    assert validate_case(micro_case) == []
    assert [u.id for u in micro_case.heat_units] == ["HO1", "HO2"]
    assert micro_case.coupled_units == []
    assert micro_case.reference_bus == "b1"


def test_bundled_cases_are_valid(oracle_case, rts_case):
    assert validate_case(oracle_case) == []
    assert validate_case(rts_case) == []
    assert len(rts_case.buses) == 24
    assert len(rts_case.lines) == 34
    assert sorted(rts_case.heat_networks()) == ["dh1", "dh2"]


def test_unlabelled_nodes_form_networks_by_pipes(oracle_case):
    assert oracle_case.heat_networks() == {"h1": ["h1", "h2"]}
    assert oracle_case.network_of("h2") == "h1"
    with pytest.raises(UnknownUnitError):
        oracle_case.network_of("h9")


def test_networks_follow_pipe_components():
    case = build_case(
        heat_nodes=[{"id": "h1"}, {"id": "h2"}, {"id": "h3"}, {"id": "h4", "network": "east"}],
        pipes=[{"id": "p12", "from_node": "h2", "to_node": "h1", "capacity": 10.0}],
    )
    assert case.heat_networks() == {"east": ["h4"], "h1": ["h1", "h2"], "h3": ["h3"]}
    assert case.heat_graph().number_of_edges() == 1


def test_power_graph(rts_case):
    graph = rts_case.power_graph()
    assert graph.number_of_nodes() == 24
    assert graph.number_of_edges() == 34


def test_chp_heat_capability_and_electricity_cost(oracle_case):
    chp = oracle_case.unit("CHP1")
    assert chp.heat_capability == pytest.approx(100.0 / 1.45)
    assert chp.electricity_cost == pytest.approx(24.0)


@pytest.mark.parametrize("p, q, on, expected", [
    (10.0, 20.0, True, True),
    (5.0, 20.0, True, False),       # below the heat-to-power ratio
    (2.0, 0.0, True, False),        # below minimum fuel
    (41.0, 0.0, True, True),
    (45.0, 0.0, True, False),       # above maximum fuel
    (0.0, 0.0, False, True),
    (1.0, 0.0, False, False),
])
def test_for_contains(oracle_case, p, q, on, expected):
    assert for_contains(oracle_case.unit("CHP1"), p, q, on) is expected


def _messages(exc_info):
    return [f"{v.path}: {v.message}" for v in exc_info.value.violations]


def test_duplicate_bus_is_rejected():
    with pytest.raises(CaseValidationError) as exc_info:
        build_case(buses=[{"id": "b1", "reference": True}, {"id": "b1"}])
    assert any("duplicate bus id 'b1'" in m for m in _messages(exc_info))


def test_disconnected_network_is_rejected():
    with pytest.raises(CaseValidationError) as exc_info:
        build_case(buses=[{"id": "b1", "reference": True}, {"id": "b2"}])
    assert any("not connected" in m for m in _messages(exc_info))


def test_block_quantities_above_capability_are_rejected():
    bids = {**MICRO["bids"], "heat": {"HO1": [{"quantity": 60.0}], "HO2": [{"quantity": 50.0}]}}
    with pytest.raises(CaseValidationError) as exc_info:
        build_case(bids=bids)
    assert any(m.startswith("bids.heat.HO1") and "exceed" in m for m in _messages(exc_info))


def test_unsorted_electricity_bids_are_rejected():
    bids = {**MICRO["bids"], "electricity": {"G1": [{"price": 30.0, "quantity": 100.0},
                                                    {"price": 10.0, "quantity": 100.0}]}}
    with pytest.raises(CaseValidationError) as exc_info:
        build_case(bids=bids)
    assert any("not sorted" in m for m in _messages(exc_info))


def test_every_violation_is_reported():
    with pytest.raises(CaseValidationError) as exc_info:
        build_case(
            loads={"electricity": {"series": {"b1": [150.0, 10.0]}}, "heat": {"series": {"h9": [70.0]}}},
            wind={"series": {"W1": [-1.0]}},
        )
    messages = _messages(exc_info)
    assert any("series length 2" in m for m in messages)
    assert any("unknown heat node 'h9'" in m for m in messages)
    assert any("negative value" in m for m in messages)


def test_missing_foreseen_lmps_for_coupled_unit(oracle_case):
    data = oracle_case.model_dump(mode="json")
    data["bids"]["foreseen_lmps"] = {"by_bus": {"b1": [0.0, 0.0, 0.0, 0.0]}}
    with pytest.raises(CaseValidationError) as exc_info:
        build_case(data)
    assert any("bus 'b2' of unit 'HP1'" in m for m in _messages(exc_info))


def test_profile_shares_resolve(rts_case):
    assert rts_case.electric_load("b15")[17] == pytest.approx(0.111 * 1700)
    assert rts_case.electric_load("b11") == [0.0] * 24
    assert sum(rts_case.wind_available(w.id)[0] for w in rts_case.units.wind) == pytest.approx(1040.0)


def test_plan_from_status_derives_transitions(oracle_case):
    on = {"CHP1": [0, 1, 1, 0], "HP1": [1, 1, 1, 1], "INC1": [0, 0, 0, 0]}
    selected = {
        "CHP1": [[0, 1, 1, 0], [0, 0, 1, 0]],
        "HP1": [[1, 1, 1, 1], [1, 0, 0, 0]],
        "INC1": [[0, 0, 0, 0], [0, 0, 0, 0]],
    }
    plan = compact.plan_from_status(oracle_case, on, selected)
    assert plan.startup["CHP1"] == [0, 1, 0, 0]
    assert plan.shutdown["CHP1"] == [0, 0, 0, 1]
    assert plan.startup_cost["CHP1"] == [0.0, 20.0, 0.0, 0.0]
    assert plan.last_selected("CHP1", 2) == 1
    assert plan.last_selected("INC1", 2) is None
    assert plan_violations(oracle_case, plan) == []


def test_plan_violations_flags_broken_plans(oracle_case):
    on = {"CHP1": [0, 1, 1, 0], "HP1": [1, 1, 1, 1], "INC1": [0, 0, 0, 0]}
    selected = {
        "CHP1": [[1, 1, 1, 0], [0, 1, 0, 0]],
        "HP1": [[1, 1, 1, 1], [0, 1, 0, 0]],
        "INC1": [[0, 0, 0, 0], [0, 0, 0, 0]],
    }
    plan = compact.plan_from_status(oracle_case, on, selected)
    broken = plan.model_copy(update={"startup": {**plan.startup, "HP1": [0, 0, 0, 0]}})
    messages = plan_violations(oracle_case, broken)
    assert "CHP1@0: block 0 selected while unit is off" in messages
    assert any(m.startswith("HP1@0: start-up/shut-down inconsistent") for m in messages)


def test_min_up_time_is_checked(oracle_case):
    data = oracle_case.model_dump(mode="json")
    data["units"]["chp"][0]["min_up"] = 3
    case = build_case(data)
    on = {"CHP1": [0, 1, 0, 0], "HP1": [0, 0, 0, 0], "INC1": [0, 0, 0, 0]}
    selected = {u.id: [[0] * 4 for _ in case.heat_blocks(u.id)] for u in case.heat_units}
    plan = compact.plan_from_status(case, on, selected)
    assert "CHP1@2: minimum up time violated" in plan_violations(case, plan)


def test_compact_matrices_reproduce_the_rows(oracle_case, oracle_bids):
    cm = compact.build_compact(oracle_case, oracle_bids)
    mats = cm.matrices()
    nh, ne, nz = len(cm.heat.columns), len(cm.electricity.columns), len(cm.z)
    assert mats["A_UC"].shape == (len(cm.uc.rows), nz)
    assert mats["A_H"].shape == (len(cm.heat.rows), nh)
    assert mats["B_H"].shape == (len(cm.heat.rows), nz)
    assert mats["A_E_heat"].shape == (len(cm.electricity.rows), nh)
    assert mats["A_E"].shape == (len(cm.electricity.rows), ne)
    assert mats["B_E"].shape == (len(cm.electricity.rows), nz)
    assert mats["c0"].shape == (nz,)

    rng = np.random.default_rng(7)
    xh, xe, z = rng.uniform(0, 10, nh), rng.uniform(0, 10, ne), rng.integers(0, 2, nz).astype(float)
    values = {**dict(zip(cm.heat.columns, xh)), **dict(zip(cm.electricity.columns, xe))}
    zmap = dict(zip(cm.z, z))

    def slack(rows):
        return np.array([sum(c * values[v] for v, c in r.coeffs.items()) - r.rhs_at(zmap) for r in rows])

    heat = mats["A_H"] @ xh + mats["B_H"] @ z - mats["b_H"]
    assert heat == pytest.approx(slack(cm.heat.rows))
    electricity = mats["A_E_heat"] @ xh + mats["A_E"] @ xe + mats["B_E"] @ z - mats["b_E"]
    assert electricity == pytest.approx(slack(cm.electricity.rows))
