import math

import pytest
import yaml

from heatuc.bidding import build_bid_book
from heatuc.errors import EnumerationBudgetError, ExitCode, ModelError
from heatuc.loader import bundled_case_path, parse_case
from heatuc.market import check_cost_recovery
from heatuc.oracle import (
    best_levels,
    count_trajectories,
    enumerate_oracle,
    feasible_trajectory,
    unit_trajectories,
)
from heatuc.schemas import HeatOnlyUnit
from heatuc.validation import plan_violations


def _unit(**kw):
    return HeatOnlyUnit(id="U", node_heat="h1", q_max=10.0, marginal_cost=1.0, **kw)


@pytest.fixture
def oracle_data():
    return yaml.safe_load(bundled_case_path("oracle").read_text())


@pytest.fixture
def two_period_case(oracle_data):
    oracle_data["horizon"]["periods"] = [0, 1]
    oracle_data["bids"]["foreseen_lmps"]["default"] = [0.0, 5.9]
    for group in (oracle_data["loads"]["electricity"], oracle_data["loads"]["heat"], oracle_data["wind"]):
        group["series"] = {k: v[:2] for k, v in group["series"].items()}
    return parse_case(oracle_data, "two_period")


@pytest.mark.parametrize("kw, trajectory, feasible", [
    ({}, (1, 0, 1), True),
    ({"min_up": 2}, (1, 0), False),
    ({"min_up": 2}, (0, 1), True),
    ({"min_up": 2, "initial_on": True}, (0, 1), True),
    ({"min_down": 2, "initial_on": True}, (0, 1), False),
    ({"min_down": 2, "initial_on": True}, (0, 0), True),
    ({"min_down": 2}, (1, 0, 1), False),
    ({"min_down": 2}, (1, 0, 0, 1), True),
])
def test_feasible_trajectory(kw, trajectory, feasible):
    assert feasible_trajectory(_unit(**kw), trajectory) is feasible


def test_unit_trajectories():
    assert len(unit_trajectories(_unit(), 2)) == 4
    assert unit_trajectories(_unit(min_up=2), 2) == [(0, 0), (0, 1), (1, 1)]


def test_count_trajectories(oracle_case):
    assert count_trajectories(oracle_case) == 16 ** 3


def test_budget(oracle_case, oracle_bids):
    with pytest.raises(EnumerationBudgetError) as exc_info:
        enumerate_oracle(oracle_case, oracle_bids, budget=10)
    assert exc_info.value.detail == {"trajectories": 4096, "budget": 10}
    assert exc_info.value.exit_code == ExitCode.BUDGET


def test_pipe_delay_is_rejected(oracle_data):
    oracle_data["pipes"][0]["delay"] = 1
    case = parse_case(oracle_data, "delayed")
    with pytest.raises(ModelError):
        enumerate_oracle(case, build_bid_book(case))


def test_best_levels_single_unit(oracle_case, oracle_bids):
    # 22 MWh at h1 plus 10 MWh at h2 need both incinerator blocks
    cost, levels, runs = best_levels(oracle_case, oracle_bids, 0.99, False, 0, frozenset({"INC1"}))
    assert levels == {"INC1": 2}
    assert runs == 3
    assert math.isfinite(cost)


def test_best_levels_nothing_committed(oracle_case, oracle_bids):
    cost, levels, runs = best_levels(oracle_case, oracle_bids, 0.99, True, 0, frozenset())
    assert cost == math.inf
    assert runs == 1


def test_filtered_plan_recovers_costs(two_period_case):
    bids = build_bid_book(two_period_case)
    res = enumerate_oracle(two_period_case, bids)
    assert res.enumerated == 4 ** 3
    assert res.validity_filter
    assert plan_violations(two_period_case, res.plan) == []
    assert check_cost_recovery(two_period_case, res.sequential).violations == []


def test_filter_can_only_cost_more_heat(two_period_case):
    bids = build_bid_book(two_period_case)
    plain = enumerate_oracle(two_period_case, bids, validity_filter=False)
    filtered = enumerate_oracle(two_period_case, bids, validity_filter=True)
    # the filtered plan, costed for the heat market alone
    startup = sum(sum(c) for c in filtered.plan.startup_cost.values())
    no_load = sum(two_period_case.unit(j).no_load_cost * sum(on) for j, on in filtered.plan.on.items())
    assert plain.objective <= filtered.sequential.heat.objective + startup + no_load + 1e-6


def test_parallel_enumeration_matches_serial(two_period_case):
    bids = build_bid_book(two_period_case)
    serial = enumerate_oracle(two_period_case, bids, workers=1)
    parallel = enumerate_oracle(two_period_case, bids, workers=2)
    assert parallel.objective == pytest.approx(serial.objective)
    assert parallel.plan.commitment_vector() == serial.plan.commitment_vector()
