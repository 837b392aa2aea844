import hashlib
from pathlib import Path
from typing import Annotated, Literal, Optional

import networkx as nx
import orjson
from pydantic import BaseModel, Field, field_validator

from .config import settings
from .errors import UnknownUnitError

SCHEMA_VERSION = 1

Ident = Annotated[str, Field(pattern=r"^[A-Za-z][A-Za-z0-9_]*$")]


class CaseModel(BaseModel):
    # unknown fields are errors, validated cases are immutable
    class Config:
        extra = "forbid"
        frozen = True


class Horizon(CaseModel):
    periods: list[int]

    @property
    def first(self) -> int:
        return self.periods[0]

    def __len__(self):
        return len(self.periods)


class Bus(CaseModel):
    id: Ident
    reference: bool = False


class Line(CaseModel):
    id: Ident
    from_bus: str
    to_bus: str
    susceptance: float
    capacity: float


class HeatNode(CaseModel):
    id: Ident
    network: Optional[str] = None


class Pipe(CaseModel):
    id: Ident
    from_node: str
    to_node: str
    capacity: float
    loss: float = 0.0
    delay: int = 0


class UnitBase(CaseModel):
    id: Ident
    no_load_cost: float = 0.0
    startup_cost: float = 0.0
    min_up: int = 1
    min_down: int = 1
    initial_on: bool = False


class ExtractionChp(UnitBase):
    node_power: str
    node_heat: str
    r: float
    rho_e: float
    rho_h: float
    f_min: float
    f_max: float
    fuel_cost: float

    @property
    def heat_capability(self) -> float:
        # largest heat output inside the operating region, reached on P = rQ at full fuel
        denominator = self.rho_h + self.r * self.rho_e
        return self.f_max / denominator if denominator > 0 else float("inf")

    @property
    def min_fuel_heat(self) -> float:
        # below this heat output the minimum-fuel edge, not the heat-to-power ratio, bounds P from below
        return self.f_min / (self.rho_h + self.r * self.rho_e)

    @property
    def electricity_cost(self) -> float:
        return self.fuel_cost * self.rho_e


class HeatPump(UnitBase):
    node_power: str
    node_heat: str
    cop: float
    q_max: float

    @property
    def heat_capability(self) -> float:
        return self.q_max


class HeatOnlyUnit(UnitBase):
    node_heat: str
    q_max: float
    marginal_cost: float

    @property
    def heat_capability(self) -> float:
        return self.q_max


class ThermalPlant(CaseModel):
    id: Ident
    node_power: str


class WindFarm(CaseModel):
    id: Ident
    node_power: str


HeatUnit = ExtractionChp | HeatPump | HeatOnlyUnit


class Units(CaseModel):
    chp: list[ExtractionChp] = []
    heat_pump: list[HeatPump] = []
    heat_only: list[HeatOnlyUnit] = []
    thermal: list[ThermalPlant] = []
    wind: list[WindFarm] = []


class BlockSpec(CaseModel):
    quantity: float
    markup: float = 0.0


class ElectricityBlock(CaseModel):
    price: float
    quantity: float


class ForeseenLmps(CaseModel):
    """Per-period LMP forecasts used to price heat bids.

    Buses without an entry in `by_bus` fall back to `default`.
    """

    default: Optional[list[float]] = None
    by_bus: dict[str, list[float]] = {}

    def at(self, bus: str) -> Optional[list[float]]:
        return self.by_bus.get(bus, self.default)


class ProfileSet(CaseModel):
    """Either explicit series per key, or one profile split by shares."""

    series: dict[str, list[float]] = {}
    profile: Optional[list[float]] = None
    shares: dict[str, float] = {}

    def resolve(self, key: str, length: int) -> list[float]:
        if key in self.series:
            return list(self.series[key])
        if key in self.shares and self.profile is not None:
            return [self.shares[key] * v for v in self.profile]
        return [0.0] * length


class Bids(CaseModel):
    foreseen_lmps: ForeseenLmps = ForeseenLmps()
    heat: dict[str, list[BlockSpec]] = {}
    electricity: dict[str, list[ElectricityBlock]] = {}


class Loads(CaseModel):
    electricity: ProfileSet = ProfileSet()
    heat: ProfileSet = ProfileSet()


def _graph(nodes: list[str], edges: list[tuple[str, str]]) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(nodes)
    # edges to unknown endpoints are reported by validation, not drawn
    graph.add_edges_from((a, b) for a, b in edges if a in graph and b in graph)
    return graph


class Case(CaseModel):
    schema_version: int
    name: str = "case"
    horizon: Horizon
    buses: list[Bus]
    lines: list[Line] = []
    heat_nodes: list[HeatNode] = []
    pipes: list[Pipe] = []
    units: Units = Units()
    bids: Bids = Bids()
    loads: Loads = Loads()
    wind: ProfileSet = ProfileSet()

    @property
    def periods(self) -> list[int]:
        return self.horizon.periods

    @property
    def heat_units(self) -> list[HeatUnit]:
        units = [*self.units.chp, *self.units.heat_pump, *self.units.heat_only]
        return sorted(units, key=lambda u: u.id)

    @property
    def coupled_units(self) -> list[ExtractionChp | HeatPump]:
        """Heat units whose marginal cost depends on the electricity price."""
        return [u for u in self.heat_units if not isinstance(u, HeatOnlyUnit)]

    def unit(self, unit_id: str):
        for group in (self.units.chp, self.units.heat_pump, self.units.heat_only,
                      self.units.thermal, self.units.wind):
            for unit in group:
                if unit.id == unit_id:
                    return unit
        raise UnknownUnitError(f"unit with id: {unit_id} not found")

    def heat_blocks(self, unit_id: str) -> list[BlockSpec]:
        return list(self.bids.heat.get(unit_id, []))

    def electricity_blocks(self, unit_id: str) -> list[ElectricityBlock]:
        return list(self.bids.electricity.get(unit_id, []))

    @property
    def reference_bus(self) -> str:
        for bus in self.buses:
            if bus.reference:
                return bus.id
        return self.buses[0].id

    def electric_load(self, bus: str) -> list[float]:
        return self.loads.electricity.resolve(bus, len(self.horizon))

    def heat_load(self, node: str) -> list[float]:
        return self.loads.heat.resolve(node, len(self.horizon))

    def wind_available(self, farm: str) -> list[float]:
        return self.wind.resolve(farm, len(self.horizon))

    def index(self, period: int) -> int:
        return period - self.horizon.first

    def heat_networks(self) -> dict[str, list[str]]:
        """Heat nodes grouped by district heating network.

        Nodes with an explicit `network` label are grouped by it, the rest
        by connected component of the pipe graph (named after the first node).
        """
        labelled: dict[str, list[str]] = {}
        for node in self.heat_nodes:
            if node.network is not None:
                labelled.setdefault(node.network, []).append(node.id)
        order = [n.id for n in self.heat_nodes if n.network is None]
        for component in nx.connected_components(self.heat_graph()):
            members = [n for n in order if n in component]
            if members:
                labelled[members[0]] = members
        return dict(sorted(labelled.items()))

    def heat_graph(self) -> nx.Graph:
        """Undirected pipe graph over the heat nodes."""
        return _graph([n.id for n in self.heat_nodes], [(p.from_node, p.to_node) for p in self.pipes])

    def power_graph(self) -> nx.Graph:
        """Undirected line graph over the buses."""
        return _graph([b.id for b in self.buses], [(l.from_bus, l.to_bus) for l in self.lines])

    def network_of(self, node: str) -> str:
        for name, members in self.heat_networks().items():
            if node in members:
                return name
        raise UnknownUnitError(f"heat node with id: {node} not found")

    def fingerprint(self) -> str:
        payload = orjson.dumps(self.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
        return hashlib.sha256(payload).hexdigest()


ModelSelector = Literal["clear", "decoupled", "aware", "compare", "oracle"]


class ScenarioConfig(BaseModel):
    case_path: Path
    model: ModelSelector = "compare"
    gamma: float = settings.GAMMA
    profile_path: Optional[Path] = None
    gap: float = settings.MIP_GAP
    time_limit: float = settings.TIME_LIMIT
    out_dir: Path = Path("results")
    export_lp: Optional[Path] = None
    big_m: Literal["dual_box", "bid_cap"] = "dual_box"
    validity_filter: bool = True

    @field_validator("gamma")
    @classmethod
    def gamma_in_open_interval(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {v}")
        return v

    @field_validator("case_path", "profile_path")
    @classmethod
    def path_exists(cls, v: Optional[Path]) -> Optional[Path]:
        if v is not None and not v.exists():
            raise ValueError(f"file not found: {v}")
        return v

    @field_validator("gap", "time_limit")
    @classmethod
    def positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("solver limits must be positive")
        return v
