import copy

import pytest

from heatuc.bidding import build_bid_book
from heatuc.loader import bundled_case, parse_case


MICRO = {
    "schema_version": 1,
    "name": "micro",
    "horizon": {"periods": [0]},
    "buses": [{"id": "b1", "reference": True}],
    "heat_nodes": [{"id": "h1"}],
    "units": {
        "heat_only": [
            {"id": "HO1", "node_heat": "h1", "q_max": 50.0, "marginal_cost": 10.0},
            {"id": "HO2", "node_heat": "h1", "q_max": 50.0, "marginal_cost": 20.0},
        ],
        "thermal": [{"id": "G1", "node_power": "b1"}],
        "wind": [{"id": "W1", "node_power": "b1"}],
    },
    "bids": {
        "heat": {"HO1": [{"quantity": 50.0}], "HO2": [{"quantity": 50.0}]},
        "electricity": {"G1": [{"price": 10.0, "quantity": 100.0}, {"price": 30.0, "quantity": 100.0}]},
    },
    "loads": {
        "electricity": {"series": {"b1": [150.0]}},
        "heat": {"series": {"h1": [70.0]}},
    },
    "wind": {"series": {"W1": [80.0]}},
}


def build_case(data=None, **changes):
    """Validated case from MICRO (or `data`) with top-level keys replaced."""
    data = copy.deepcopy(data or MICRO)
    data.update(copy.deepcopy(changes))
    return parse_case(data, "test")


@pytest.fixture
def micro_data():
    return copy.deepcopy(MICRO)


@pytest.fixture
def micro_case():
    return build_case()


@pytest.fixture(scope="session")
def oracle_case():
    return bundled_case("oracle")


@pytest.fixture(scope="session")
def oracle_bids(oracle_case):
    return build_bid_book(oracle_case)


@pytest.fixture(scope="session")
def rts_case():
    return bundled_case("rts24_dh")


@pytest.fixture(scope="session")
def rts_bids(rts_case):
    return build_bid_book(rts_case)
