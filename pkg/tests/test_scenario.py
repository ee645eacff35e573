import json
import math
from dataclasses import replace
from itertools import combinations

import pytest

from hexplace.scenario import (
    BoundarySpec,
    DistributionParams,
    LockdownParams,
    ScenarioConfig,
    ScenarioError,
    cell_hierarchy,
    generate_hex_scenario,
    hex_cells,
    parse_scenario,
    write_scenario,
)

MINIMAL = {
    "boundaries": [[0, 0, 10, 0, 1]],
    "regions": [{"id": "a", "population": 1, "infected": 0, "center": [5, 5], "radius": 2, "mobilityFactor": 1}],
    "spreadRadius": 5,
    "curePeriod": 250,
    "killProbability": 0.005,
    "transmissionProbability": 0.7,
    "boundaryThickness": 1,
}


def _doc(**changes):
    doc = json.loads(json.dumps(MINIMAL))
    doc.update(changes)
    return doc


def test_parse_minimal():
    cfg = parse_scenario(json.dumps(MINIMAL))
    assert len(cfg.boundaries) == 1
    assert cfg.boundaries[0].impermeability == 1.0
    assert len(cfg.regions) == 1
    assert cfg.regions[0].center == (5.0, 5.0)
    assert cfg.disease.kill_check_interval == 1
    # absent intervention blocks switch the features off
    assert not cfg.lockdown.enabled
    assert cfg.vaccine.quantity == 0 and cfg.medicine.quantity == 0
    assert cfg.max_steps == 100_000


def test_impermeability_out_of_range():
    doc = _doc(boundaries=[[0, 0, 10, 0, 1.5]])
    with pytest.raises(ScenarioError, match=r"boundaries\[0\]\.impermeability out of range"):
        parse_scenario(json.dumps(doc))


def test_infected_exceeds_population():
    doc = _doc()
    doc["regions"][0].update(population=5, infected=6)
    with pytest.raises(ScenarioError, match=r"regions\[0\]: infected exceeds population"):
        parse_scenario(json.dumps(doc))


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d["regions"][0].update(radius=0), r"regions\[0\]\.radius"),
        (lambda d: d["regions"][0].update(radius=-1), r"regions\[0\]\.radius"),
        (lambda d: d.update(vaccineDistributionMechanism="lottery"), "vaccineDistributionMechanism"),
        (lambda d: d.update(medicineDistributionFrequency=0), "medicineDistributionFrequency"),
        (lambda d: d.update(lockdownStartThreshold=0.1), "lockdownEndThreshold"),
        (lambda d: d.update(boundaries=[[1, 1, 1, 1, 0.5]]), r"boundaries\[0\]"),
        (lambda d: d.pop("spreadRadius"), "spreadRadius"),
        (lambda d: d["regions"].append(dict(d["regions"][0])), r"regions\[1\]\.id"),
    ],
)
def test_validation_names_field(mutate, field):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ScenarioError, match=field):
        parse_scenario(json.dumps(doc))


def test_malformed_json_reports_byte_offset():
    text = '{"boundaries": [], "régions": ]'
    with pytest.raises(ScenarioError, match="byte 31"):
        parse_scenario(text)


def test_write_round_trip_minimal():
    cfg = parse_scenario(json.dumps(MINIMAL))
    assert parse_scenario(write_scenario(cfg)) == cfg


def test_write_empty_boundaries():
    cfg = parse_scenario(json.dumps(_doc(boundaries=[])))
    assert json.loads(write_scenario(cfg))["boundaries"] == []


def test_write_distribution_fields():
    cfg = parse_scenario(json.dumps(MINIMAL))
    cfg = replace(cfg, vaccine=DistributionParams(start_time=300, frequency=100, quantity=200, mechanism="equitable"))
    doc = json.loads(write_scenario(cfg))
    assert doc["vaccineDistributionQuantity"] == 200
    assert doc["vaccineDistributionStartTime"] == 300
    assert doc["vaccineDistributionFrequency"] == 100
    assert doc["vaccineDistributionMechanism"] == "equitable"


def test_lockdown_round_trip():
    cfg = replace(parse_scenario(json.dumps(MINIMAL)), lockdown=LockdownParams(0.1, 0.02, 0.1, True))
    out = parse_scenario(write_scenario(cfg))
    assert out.lockdown == LockdownParams(0.1, 0.02, 0.1, True)


# -- honeycomb ---------------------------------------------------------------

def test_hex_cells_rings():
    cells = hex_cells(2)
    assert len(cells) == len(set(cells)) == 19
    assert all(sum(c) == 0 for c in cells)
    rings = [max(map(abs, c)) for c in cells]
    assert rings == [0] + [1] * 6 + [2] * 12


def test_hierarchy_assignment():
    tiers = [cell_hierarchy(c) for c in hex_cells(2)]
    assert tiers.count("city") == 1
    assert tiers.count("town") == 6
    assert tiers.count("village") == 12
    assert all(t == "village" for t in tiers[1:7])


def test_hex_defaults_population_and_infected():
    cfg = generate_hex_scenario()
    assert cfg.initial_population == 1530
    assert cfg.initial_infected == 5 + 6 * 5 + 12 * 1 == 47
    assert len(cfg.regions) == 19


def _edge_oracle(circumradius):
    """Independent edge count: rebuild every hexagon's six edges and merge
    edges whose endpoints agree within a tolerance."""
    edges = []
    for q, r, _ in hex_cells(2):
        cx = circumradius * math.sqrt(3) * (q + r / 2)
        cy = circumradius * 1.5 * r
        pts = [(cx + circumradius * math.cos(math.radians(60 * k - 30)),
                cy + circumradius * math.sin(math.radians(60 * k - 30))) for k in range(6)]
        for k in range(6):
            edges.append((pts[k], pts[(k + 1) % 6]))

    def same(e, f):
        close = lambda a, b: math.dist(a, b) < 1e-6 * circumradius
        return (close(e[0], f[0]) and close(e[1], f[1])) or (close(e[0], f[1]) and close(e[1], f[0]))

    shared = sum(1 for e, f in combinations(edges, 2) if same(e, f))
    return len(edges), shared, len(edges) - shared


def test_hex_boundary_count_matches_oracle():
    total, shared, unique = _edge_oracle(60.0)
    assert (total, shared, unique) == (114, 42, 72)
    cfg = generate_hex_scenario()
    assert len(cfg.boundaries) == unique
    perimeter = total - 2 * shared
    assert perimeter == 30


def test_hex_edges_unique():
    cfg = generate_hex_scenario(37.5)
    keys = {frozenset((b.p0, b.p1)) for b in cfg.boundaries}
    assert len(keys) == len(cfg.boundaries)


def test_hex_impermeability_by_pair():
    cfg = generate_hex_scenario()
    values = sorted(b.impermeability for b in cfg.boundaries)
    # city borders 6 villages; each town borders 3 villages (18 edges);
    # everything else is village-village or perimeter
    assert values.count(0.7) == 6
    assert values.count(0.8) == 18
    assert values.count(1.0) == 72 - 24
    assert all(0.0 <= v <= 1.0 for v in values)


def test_hex_unlisted_pairs_default_to_wall():
    cfg = generate_hex_scenario(impermeability={("city", "village"): 0.25})
    assert sorted({b.impermeability for b in cfg.boundaries}) == [0.25, 1.0]


def test_hex_spawn_circles_inside_cells():
    cfg = generate_hex_scenario(60.0)
    inradius = 60.0 * math.sqrt(3) / 2
    for r in cfg.regions:
        assert r.radius == pytest.approx(0.95 * inradius)
    centers = [r.center for r in cfg.regions]
    for a, b in combinations(centers, 2):
        assert math.dist(a, b) >= 2 * inradius - 1e-6


def test_hex_deterministic_and_round_trips():
    a, b = generate_hex_scenario(), generate_hex_scenario()
    assert a == b
    assert parse_scenario(write_scenario(a)) == a


def test_hex_conservation_custom_table():
    table = {"city": (100, 1, 1.0), "town": (20, 2, 2.0), "village": (7, 0, 3.0)}
    cfg = generate_hex_scenario(10.0, table)
    assert cfg.initial_population == 100 + 6 * 20 + 12 * 7


def test_hex_requires_all_tiers():
    with pytest.raises(ScenarioError):
        generate_hex_scenario(hierarchy={"city": (1, 0, 1.0)})


def test_boundary_spec_equality_is_fieldwise():
    cfg = ScenarioConfig(boundaries=(BoundarySpec((0.0, 0.0), (1.0, 0.0), 0.5),), regions=generate_hex_scenario().regions)
    assert parse_scenario(write_scenario(cfg)) == cfg
