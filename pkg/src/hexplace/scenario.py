"""Scenario configuration: JSON schema, validation and the honeycomb generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

MECHANISMS = ("equitable", "maximumInfection", "maximumUninfected", "infectedAndUninfected")
DEFAULT_MAX_STEPS = 100_000


class ScenarioError(ValueError):
    """Raised for malformed or invalid scenario input."""


@dataclass(frozen=True)
class BoundarySpec:
    p0: tuple[float, float]
    p1: tuple[float, float]
    impermeability: float


@dataclass(frozen=True)
class RegionSpec:
    id: str
    population: int
    infected: int
    center: tuple[float, float]
    radius: float
    mobility_factor: float


@dataclass(frozen=True)
class DiseaseParams:
    spread_radius: float = 5.0
    transmission_probability: float = 0.7
    cure_period: int = 250
    kill_probability: float = 0.005
    kill_check_interval: int = 1


@dataclass(frozen=True)
class LockdownParams:
    start_threshold: float = 1.0
    end_threshold: float = 0.0
    mobility_multiplier: float = 1.0
    enabled: bool = False


@dataclass(frozen=True)
class DistributionParams:
    start_time: int = 0
    frequency: int = 1
    quantity: int = 0
    mechanism: str = "equitable"


@dataclass(frozen=True)
class ScenarioConfig:
    boundaries: tuple[BoundarySpec, ...]
    regions: tuple[RegionSpec, ...]
    disease: DiseaseParams = field(default_factory=DiseaseParams)
    boundary_thickness: float = 0.0
    lockdown: LockdownParams = field(default_factory=LockdownParams)
    vaccine: DistributionParams = field(default_factory=DistributionParams)
    medicine: DistributionParams = field(default_factory=DistributionParams)
    max_steps: int = DEFAULT_MAX_STEPS

    @property
    def initial_population(self) -> int:
        return sum(r.population for r in self.regions)

    @property
    def initial_infected(self) -> int:
        return sum(r.infected for r in self.regions)


# -- parsing -----------------------------------------------------------------

def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{name}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(f"{name}: must be finite")
    return float(value)


def _count(value: Any, name: str) -> int:
    x = _number(value, name)
    if x != int(x):
        raise ScenarioError(f"{name}: expected an integer, got {value!r}")
    return int(x)


def _probability(value: Any, name: str) -> float:
    x = _number(value, name)
    if not 0.0 <= x <= 1.0:
        raise ScenarioError(f"{name} out of range")
    return x


def _point(value: Any, name: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"{name}: expected [x, y]")
    return (_number(value[0], f"{name}[0]"), _number(value[1], f"{name}[1]"))


def _parse_boundary(item: Any, i: int) -> BoundarySpec:
    name = f"boundaries[{i}]"
    if not isinstance(item, (list, tuple)) or len(item) != 5:
        raise ScenarioError(f"{name}: expected [x1, y1, x2, y2, impermeability]")
    x1, y1, x2, y2 = (_number(v, name) for v in item[:4])
    if (x1, y1) == (x2, y2):
        raise ScenarioError(f"{name}: endpoints coincide")
    return BoundarySpec((x1, y1), (x2, y2), _probability(item[4], f"{name}.impermeability"))


def _parse_region(item: Any, i: int) -> RegionSpec:
    name = f"regions[{i}]"
    if not isinstance(item, Mapping):
        raise ScenarioError(f"{name}: expected an object")
    for key in ("id", "population", "infected", "center", "radius", "mobilityFactor"):
        if key not in item:
            raise ScenarioError(f"{name}.{key}: missing")
    population = _count(item["population"], f"{name}.population")
    infected = _count(item["infected"], f"{name}.infected")
    if population < 0:
        raise ScenarioError(f"{name}.population: must be >= 0")
    if infected < 0:
        raise ScenarioError(f"{name}.infected: must be >= 0")
    if infected > population:
        raise ScenarioError(f"{name}: infected exceeds population")
    radius = _number(item["radius"], f"{name}.radius")
    if radius <= 0:
        raise ScenarioError(f"{name}.radius: must be > 0")
    mobility = _number(item["mobilityFactor"], f"{name}.mobilityFactor")
    if mobility <= 0:
        raise ScenarioError(f"{name}.mobilityFactor: must be > 0")
    return RegionSpec(
        id=str(item["id"]),
        population=population,
        infected=infected,
        center=_point(item["center"], f"{name}.center"),
        radius=radius,
        mobility_factor=mobility,
    )


def _parse_distribution(doc: Mapping, prefix: str) -> DistributionParams:
    d = DistributionParams()
    start = _count(doc.get(f"{prefix}StartTime", d.start_time), f"{prefix}StartTime")
    freq = _count(doc.get(f"{prefix}Frequency", d.frequency), f"{prefix}Frequency")
    qty = _count(doc.get(f"{prefix}Quantity", d.quantity), f"{prefix}Quantity")
    mechanism = doc.get(f"{prefix}Mechanism", d.mechanism)
    if start < 0:
        raise ScenarioError(f"{prefix}StartTime: must be >= 0")
    if freq < 1:
        raise ScenarioError(f"{prefix}Frequency: must be >= 1")
    if qty < 0:
        raise ScenarioError(f"{prefix}Quantity: must be >= 0")
    if mechanism not in MECHANISMS:
        raise ScenarioError(f"{prefix}Mechanism: unknown mechanism {mechanism!r}")
    return DistributionParams(start, freq, qty, mechanism)


def _parse_lockdown(doc: Mapping) -> LockdownParams:
    keys = ("lockdownStartThreshold", "lockdownEndThreshold", "lockdownMobilityMultiplier")
    present = [k for k in keys if k in doc]
    if not present:
        return LockdownParams()
    for k in keys:
        if k not in doc:
            raise ScenarioError(f"{k}: missing (lockdown needs all three thresholds)")
    start, end, mult = (_probability(doc[k], k) for k in keys)
    if end > start:
        raise ScenarioError("lockdownEndThreshold: must not exceed lockdownStartThreshold")
    return LockdownParams(start, end, mult, enabled=True)


def config_from_dict(doc: Any) -> ScenarioConfig:
    if not isinstance(doc, Mapping):
        raise ScenarioError("top level: expected a JSON object")
    for key in ("boundaries", "regions"):
        if key not in doc:
            raise ScenarioError(f"{key}: missing")
    if not isinstance(doc["boundaries"], list):
        raise ScenarioError("boundaries: expected an array")
    if not isinstance(doc["regions"], list) or not doc["regions"]:
        raise ScenarioError("regions: expected a non-empty array")
    boundaries = tuple(_parse_boundary(b, i) for i, b in enumerate(doc["boundaries"]))
    regions = tuple(_parse_region(r, i) for i, r in enumerate(doc["regions"]))
    seen = set()
    for i, r in enumerate(regions):
        if r.id in seen:
            raise ScenarioError(f"regions[{i}].id: duplicate id {r.id!r}")
        seen.add(r.id)
    if sum(r.population for r in regions) < 1:
        raise ScenarioError("regions: total population must be >= 1")

    for key in ("spreadRadius", "curePeriod", "killProbability", "transmissionProbability"):
        if key not in doc:
            raise ScenarioError(f"{key}: missing")
    spread = _number(doc["spreadRadius"], "spreadRadius")
    if spread <= 0:
        raise ScenarioError("spreadRadius: must be > 0")
    cure = _count(doc["curePeriod"], "curePeriod")
    if cure < 1:
        raise ScenarioError("curePeriod: must be >= 1")
    interval = _count(doc.get("killCheckInterval", 1), "killCheckInterval")
    if interval < 1:
        raise ScenarioError("killCheckInterval: must be >= 1")
    disease = DiseaseParams(
        spread_radius=spread,
        transmission_probability=_probability(doc["transmissionProbability"], "transmissionProbability"),
        cure_period=cure,
        kill_probability=_probability(doc["killProbability"], "killProbability"),
        kill_check_interval=interval,
    )
    thickness = _number(doc.get("boundaryThickness", 0.0), "boundaryThickness")
    if thickness < 0:
        raise ScenarioError("boundaryThickness: must be >= 0")
    max_steps = _count(doc.get("maxSteps", DEFAULT_MAX_STEPS), "maxSteps")
    if max_steps < 0:
        raise ScenarioError("maxSteps: must be >= 0")
    return ScenarioConfig(
        boundaries=boundaries,
        regions=regions,
        disease=disease,
        boundary_thickness=thickness,
        lockdown=_parse_lockdown(doc),
        vaccine=_parse_distribution(doc, "vaccineDistribution"),
        medicine=_parse_distribution(doc, "medicineDistribution"),
        max_steps=max_steps,
    )


def parse_scenario(text: str | bytes) -> ScenarioConfig:
    """Parse and validate scenario JSON.

    Raises :class:`ScenarioError` for malformed JSON (with the byte offset of
    the problem) and for any field that violates its bounds.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ScenarioError(f"malformed JSON at byte {offset}: {exc.msg}") from None
    return config_from_dict(doc)


# -- writing -----------------------------------------------------------------

def config_to_dict(config: ScenarioConfig) -> dict:
    d = config.disease
    doc: dict[str, Any] = {
        "boundaries": [[*b.p0, *b.p1, b.impermeability] for b in config.boundaries],
        "regions": [
            {
                "id": r.id,
                "population": r.population,
                "infected": r.infected,
                "center": list(r.center),
                "radius": r.radius,
                "mobilityFactor": r.mobility_factor,
            }
            for r in config.regions
        ],
        "boundaryThickness": config.boundary_thickness,
        "spreadRadius": d.spread_radius,
        "curePeriod": d.cure_period,
        "killProbability": d.kill_probability,
        "transmissionProbability": d.transmission_probability,
        "killCheckInterval": d.kill_check_interval,
    }
    if config.lockdown.enabled:
        doc["lockdownStartThreshold"] = config.lockdown.start_threshold
        doc["lockdownEndThreshold"] = config.lockdown.end_threshold
        doc["lockdownMobilityMultiplier"] = config.lockdown.mobility_multiplier
    for prefix, params in (("vaccineDistribution", config.vaccine), ("medicineDistribution", config.medicine)):
        doc[f"{prefix}StartTime"] = params.start_time
        doc[f"{prefix}Frequency"] = params.frequency
        doc[f"{prefix}Quantity"] = params.quantity
        doc[f"{prefix}Mechanism"] = params.mechanism
    doc["maxSteps"] = config.max_steps
    return doc


def write_scenario(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2) + "\n"


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- honeycomb generator -----------------------------------------------------

# Cells this large keep the spread radius small against settlement size and
# leave the lockdown runs room for several distinct infection waves.
DEFAULT_CIRCUMRADIUS = 250.0

# hierarchy -> (population, infected, mobilityFactor)
DEFAULT_HIERARCHY = {
    "city": (750, 5, 1.0),
    "town": (100, 5, 3.0),
    "village": (15, 1, 5.0),
}

DEFAULT_IMPERMEABILITY = {
    ("city", "village"): 0.7,
    ("town", "village"): 0.8,
    ("village", "village"): 1.0,
}

# cube-coordinate neighbor directions, counter-clockwise
_CUBE_DIRS = ((1, -1, 0), (1, 0, -1), (0, 1, -1), (-1, 1, 0), (-1, 0, 1), (0, -1, 1))


def hex_cells(rings: int = 2) -> list[tuple[int, int, int]]:
    """Cube coordinates of a hexagonal patch, center first then ring by ring."""
    cells = [(0, 0, 0)]
    for k in range(1, rings + 1):
        q, r, s = (c * k for c in _CUBE_DIRS[4])
        for side in range(6):
            for _ in range(k):
                cells.append((q, r, s))
                dq, dr, ds = _CUBE_DIRS[side]
                q, r, s = q + dq, r + dr, s + ds
    return cells


def cell_hierarchy(cube: tuple[int, int, int]) -> str:
    """City at the center, villages in ring 1, towns at the ring-2 corners."""
    ring = max(abs(c) for c in cube)
    if ring == 0:
        return "city"
    if ring == 2 and 0 in cube:
        return "town"
    return "village"


def _cell_center(cube, circumradius: float) -> tuple[float, float]:
    q, r, _ = cube
    # pointy-top layout
    return (circumradius * math.sqrt(3.0) * (q + r / 2.0), circumradius * 1.5 * r)


def _cell_vertices(center, circumradius: float) -> list[tuple[float, float]]:
    out = []
    for k in range(6):
        a = math.radians(60.0 * k - 30.0)
        # rounding makes vertices shared by neighboring cells bit-identical
        x = round(center[0] + circumradius * math.cos(a), 9) + 0.0
        y = round(center[1] + circumradius * math.sin(a), 9) + 0.0
        out.append((x, y))
    return out


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return tuple(sorted((a, b)))  # type: ignore[return-value]


def generate_hex_scenario(
    circumradius: float = DEFAULT_CIRCUMRADIUS,
    hierarchy: Mapping[str, tuple] | None = None,
    impermeability: Mapping[tuple[str, str], float] | None = None,
    *,
    disease: DiseaseParams | None = None,
    boundary_thickness: float = 1.0,
    lockdown: LockdownParams | None = None,
    vaccine: DistributionParams | None = None,
    medicine: DistributionParams | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> ScenarioConfig:
    """Build the 19-cell city/town/village honeycomb.

    Each cell gets a circular spawn region inscribed in its hexagon; every
    distinct hex edge becomes one boundary. Edges between two cells take the
    impermeability of their hierarchy pair (1.0 when the pair is unlisted);
    the outer perimeter is fully impermeable.
    """
    if circumradius <= 0:
        raise ScenarioError("circumradius: must be > 0")
    hierarchy = dict(DEFAULT_HIERARCHY if hierarchy is None else hierarchy)
    for tier in ("city", "town", "village"):
        if tier not in hierarchy:
            raise ScenarioError(f"hierarchy: missing entry for {tier!r}")
    table = DEFAULT_IMPERMEABILITY if impermeability is None else impermeability
    table = {_pair_key(*k): float(v) for k, v in table.items()}

    cells = hex_cells(2)
    tiers = [cell_hierarchy(c) for c in cells]
    centers = [_cell_center(c, circumradius) for c in cells]
    spawn_radius = circumradius * math.sqrt(3.0) / 2.0 * 0.95

    counters: dict[str, int] = {}
    regions = []
    for tier, center in zip(tiers, centers):
        counters[tier] = counters.get(tier, 0) + 1
        rid = tier if tier == "city" else f"{tier}{counters[tier]}"
        population, infected, mobility = hierarchy[tier]
        regions.append(RegionSpec(rid, int(population), int(infected),
                                  (round(center[0], 9) + 0.0, round(center[1], 9) + 0.0),
                                  spawn_radius, float(mobility)))

    # edge key -> (endpoints in first-seen order, owning cell indices)
    edges: dict[frozenset, tuple[tuple, list[int]]] = {}
    for i, center in enumerate(centers):
        verts = _cell_vertices(center, circumradius)
        for k in range(6):
            a, b = verts[k], verts[(k + 1) % 6]
            key = frozenset((a, b))
            if key in edges:
                edges[key][1].append(i)
            else:
                edges[key] = ((a, b), [i])

    boundaries = []
    for (a, b), owners in edges.values():
        if len(owners) == 2:
            imp = table.get(_pair_key(tiers[owners[0]], tiers[owners[1]]), 1.0)
        else:
            imp = 1.0
        boundaries.append(BoundarySpec(a, b, imp))

    return ScenarioConfig(
        boundaries=tuple(boundaries),
        regions=tuple(regions),
        disease=disease or DiseaseParams(),
        boundary_thickness=boundary_thickness,
        lockdown=lockdown or LockdownParams(),
        vaccine=vaccine or DistributionParams(),
        medicine=medicine or DistributionParams(),
        max_steps=max_steps,
    )

