"""Agent state and the per-step update loop.

Randomness comes from a single numpy ``Generator`` over the PCG64 bit
generator, seeded with the run seed. Uniform floats are numpy's standard
53-bit mapping, ``(next_uint64 >> 11) * 2**-53``. Draws are consumed in this
fixed order every step:

1. vaccine doses, then medicine doses (region by region, one draw per dose);
2. boundary encounters, one draw each, round by round; within a round in
   ascending agent order;
3. transmission, one draw per (uninfected, infected-in-range) pair, ordered
   by uninfected id then infected id;
4. kill checks, one draw per infected agent due a check, in id order.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import RegionLocator, Vec2
from .interventions import (
    IMMUNE,
    INFECTED,
    MEDICINE,
    UNINFECTED,
    VACCINE,
    allocate_doses,
    apply_doses,
    distribution_due,
    region_stats,
    update_lockdowns,
)
from .neighborhood import NeighborIndex
from .scenario import BoundarySpec, ScenarioConfig
from .stats import Summary, TimeSeries, snapshot_rows

log = logging.getLogger(__name__)

MAX_RESOLUTIONS = 8
# Distance an agent is set off a boundary after an encounter, so the next
# sub-move starts unambiguously on the intended side.
SKIN = 1e-9
HEALTH_NAMES = {UNINFECTED: "uninfected", INFECTED: "infected", IMMUNE: "immune"}


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class Walls:
    """Boundary segments as arrays, plus a coarse grid listing, for each
    cell, the segments reachable by a move of at most ``reach``."""

    def __init__(self, boundaries: Sequence[BoundarySpec], reach: float = 0.0):
        n = len(boundaries)
        self.b0 = np.array([b.p0 for b in boundaries], dtype=float).reshape(n, 2)
        self.b1 = np.array([b.p1 for b in boundaries], dtype=float).reshape(n, 2)
        self.imp = np.array([b.impermeability for b in boundaries], dtype=float)
        self.edge = self.b1 - self.b0
        lengths = np.hypot(self.edge[:, 0], self.edge[:, 1])
        self.normal = np.column_stack([-self.edge[:, 1], self.edge[:, 0]]) / np.where(lengths > 0, lengths, 1.0)[:, None]
        self.elen = lengths
        self.reach = float(reach)
        self._all = np.arange(n, dtype=np.int64)[None, :]
        self._build_grid()

    def __len__(self) -> int:
        return len(self.imp)

    def _build_grid(self) -> None:
        n = len(self)
        if n == 0 or self.reach <= 0:
            self._grid = None
            return
        lo = np.minimum(self.b0, self.b1).min(axis=0) - self.reach
        hi = np.maximum(self.b0, self.b1).max(axis=0) + self.reach
        extent = float((hi - lo).max())
        size = max(2.0 * self.reach, extent / 256.0)
        shape = np.maximum(np.ceil((hi - lo) / size).astype(np.int64), 1)
        ii, jj = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
        mid = lo + (np.column_stack([ii.ravel(), jj.ravel()]) + 0.5) * size
        # a segment is listed in a cell when it passes within reach of any
        # point of the cell (tested against the circumscribed circle)
        near = np.concatenate([
            _point_segment_distance(chunk, self.b0, self.b1) <= self.reach + size * math.sqrt(0.5) + 1e-9
            for chunk in np.array_split(mid, max(1, len(mid) // 4096))
        ])
        width = max(1, int(near.sum(axis=1).max()))
        # listed segments first, in index order, then -1 padding
        order = np.argsort(~near, axis=1, kind="stable")[:, :width]
        table = np.where(np.take_along_axis(near, order, axis=1), order, -1)
        table = np.vstack([table, np.full((1, width), -1, dtype=table.dtype)]).astype(np.int64)
        self._grid = (lo, size, shape, table)
        self._busy = table[:, 0] >= 0

    def candidates(self, points: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        """(n, k) segment indices possibly hit by moves from ``points``; -1 pads."""
        if self._grid is None or (len(lengths) and lengths.max() > self.reach * (1 + 1e-9)):
            return np.broadcast_to(self._all, (len(points), len(self)))
        return self._grid[3][self._cells(points)]

    def _cells(self, points: np.ndarray) -> np.ndarray:
        lo, size, shape, table = self._grid
        cell = np.floor((points - lo) / size).astype(np.int64)
        inside = (cell[:, 0] >= 0) & (cell[:, 0] < shape[0]) & (cell[:, 1] >= 0) & (cell[:, 1] < shape[1])
        return np.where(inside, cell[:, 0] * shape[1] + cell[:, 1], len(table) - 1)

    def first_hit(self, p: np.ndarray, r: np.ndarray, exclude: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest boundary crossed by each motion p -> p + r.

        Returns (segment index or -1, t along the motion). Same arithmetic as
        :func:`geometry.segment_intersection`.
        """
        m = len(p)
        seg = np.full(m, -1, dtype=np.int64)
        tbest = np.full(m, np.inf)
        if m == 0 or len(self) == 0:
            return seg, tbest
        rlen = np.hypot(r[:, 0], r[:, 1])
        if self._grid is None or rlen.max() > self.reach * (1 + 1e-9):
            rows = np.flatnonzero(rlen > 0)
            c = np.broadcast_to(self._all, (len(rows), len(self)))
        else:
            flat = self._cells(p)
            rows = np.flatnonzero(self._busy[flat] & (rlen > 0))
            c = self._grid[3][flat[rows]]
        if len(rows) == 0:
            return seg, tbest
        cs = np.where(c >= 0, c, 0)
        ex, ey = self.edge[cs, 0], self.edge[cs, 1]
        qx = self.b0[cs, 0] - p[rows, 0, None]
        qy = self.b0[cs, 1] - p[rows, 1, None]
        rx, ry = r[rows, 0, None], r[rows, 1, None]
        denom = rx * ey - ry * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qx * ey - qy * ex) / denom
            u = (qx * ry - qy * rx) / denom
        ok = (
            (c >= 0)
            & (c != exclude[rows, None])
            & (np.abs(denom) > 1e-12 * rlen[rows, None] * self.elen[cs])
            & (t > 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
        )
        t = np.where(ok, t, np.inf)
        k = t.argmin(axis=1)
        tk = t[np.arange(len(rows)), k]
        hit = np.isfinite(tk)
        seg[rows[hit]] = c[np.flatnonzero(hit), k[hit]]
        tbest[rows[hit]] = tk[hit]
        return seg, tbest


@lru_cache(maxsize=8)
def _cached_walls(boundaries: tuple[BoundarySpec, ...], reach: float) -> Walls:
    # ensembles rebuild states for the same geometry; the grid is read-only
    return Walls(boundaries, reach)


def _point_segment_distance(points: np.ndarray, b0: np.ndarray, b1: np.ndarray) -> np.ndarray:
    """(points, segments) Euclidean distances."""
    e = b1 - b0
    w = points[:, None, :] - b0[None, :, :]
    ee = (e * e).sum(axis=1)
    s = np.clip((w * e[None]).sum(axis=2) / np.where(ee > 0, ee, 1.0), 0.0, 1.0)
    d = w - s[..., None] * e[None]
    return np.hypot(d[..., 0], d[..., 1])


def move_agents(pos: np.ndarray, direction: np.ndarray, distance: np.ndarray, walls: Walls,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Advance every agent ``distance`` along its direction, resolving boundary
    encounters: each crossing draws one uniform and reflects when it falls
    below the boundary's impermeability, otherwise passes through.

    After ``MAX_RESOLUTIONS`` encounters in one move the agent stops at the
    last intersection point.
    """
    pos = np.array(pos, dtype=float).reshape(-1, 2)
    direction = np.array(direction, dtype=float).reshape(-1, 2)
    remaining = np.array(distance, dtype=float).reshape(-1).copy()
    last = np.full(len(pos), -1, dtype=np.int64)
    # first round over everyone without gathering rows
    r = direction * remaining[:, None]
    seg, t = walls.first_hit(pos, r, last)
    hit = seg >= 0
    pos += np.where(hit[:, None], 0.0, r)
    active = np.flatnonzero(hit)
    seg, t = seg[active], t[active]
    for round_ in range(1, MAX_RESOLUTIONS + 1):
        if len(active) == 0:
            break
        p = pos[active]
        r = direction[active] * remaining[active, None]
        point = p + t[:, None] * r
        reflect = rng.random(len(active)) < walls.imp[seg]
        n = walls.normal[seg]
        b0 = walls.b0[seg]
        side = np.sign((p[:, 0] - b0[:, 0]) * n[:, 0] + (p[:, 1] - b0[:, 1]) * n[:, 1])
        side = np.where(side == 0, -np.sign(r[:, 0] * n[:, 0] + r[:, 1] * n[:, 1]), side)
        d = direction[active]
        dot = d[:, 0] * n[:, 0] + d[:, 1] * n[:, 1]
        direction[active] = np.where(reflect[:, None], d - 2.0 * dot[:, None] * n, d)
        # a reflection also backs off along the incoming ray so that a hit
        # landing exactly on a vertex stays inside the neighbouring wall too
        back = np.where(reflect, SKIN, 0.0)[:, None] * d
        pos[active] = point - back + (np.where(reflect, side, -side) * SKIN)[:, None] * n
        remaining[active] *= 1.0 - t
        last[active] = seg
        p = pos[active]
        r = direction[active] * remaining[active, None]
        seg, t = walls.first_hit(p, r, last[active])
        hit = seg >= 0
        free = active[~hit]
        pos[free] += r[~hit]
        if round_ == MAX_RESOLUTIONS:
            break
        active, seg, t = active[hit], seg[hit], t[hit]
    return pos, direction


@dataclass
class Agent:
    id: int
    position: Vec2
    direction: Vec2
    base_speed: float
    health: str
    infected_since: int | None


class SimulationState:
    """Live agents as parallel arrays in ascending id order."""

    def __init__(self, config: ScenarioConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.step = 0
        n_regions = len(config.regions)
        self.centers = np.array([r.center for r in config.regions], dtype=float)
        self.lockdown = [False] * n_regions
        self.locate = RegionLocator(self.centers, pad=1.25 * max(r.radius for r in config.regions))
        self.dead_per_region = np.zeros(n_regions, dtype=np.int64)
        reach = max(r.mobility_factor for r in config.regions)
        self.walls = _cached_walls(config.boundaries, reach)
        self.ids = np.zeros(0, dtype=np.int64)
        self.pos = np.zeros((0, 2))
        self.dir = np.zeros((0, 2))
        self.speed = np.zeros(0)
        self.health = np.zeros(0, dtype=np.int64)
        self.since = np.zeros(0, dtype=np.int64)
        self.region = np.zeros(0, dtype=np.int64)
        self.initial_population = 0

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def agents(self) -> list[Agent]:
        return [
            Agent(int(i), Vec2(*p), Vec2(*d), float(s), HEALTH_NAMES[int(h)], None if h != INFECTED else int(t))
            for i, p, d, s, h, t in zip(self.ids, self.pos.tolist(), self.dir.tolist(),
                                        self.speed, self.health, self.since)
        ]

    def count(self, health: int) -> int:
        return int((self.health == health).sum())

    def stats(self):
        return region_stats(self.region, self.health, len(self.centers))

    def refresh_regions(self) -> None:
        self.region = self.locate(self.pos)

    def remove(self, rows: np.ndarray) -> None:
        keep = np.ones(len(self.ids), dtype=bool)
        keep[rows] = False
        for name in ("ids", "pos", "dir", "speed", "health", "since", "region"):
            setattr(self, name, getattr(self, name)[keep])

    def copy(self) -> "SimulationState":
        other = object.__new__(SimulationState)
        other.__dict__.update(self.__dict__)
        for name in ("ids", "pos", "dir", "speed", "health", "since", "region", "dead_per_region"):
            setattr(other, name, getattr(self, name).copy())
        other.lockdown = list(self.lockdown)
        bit = np.random.PCG64()
        bit.state = self.rng.bit_generator.state
        other.rng = np.random.Generator(bit)
        return other


def init_state(config: ScenarioConfig, seed: int) -> SimulationState:
    """Spawn every region's agents uniformly in its circle.

    Per agent three draws: radius ``R*sqrt(u)``, angle ``2*pi*u'`` and heading
    ``2*pi*u''``. The first ``infected`` agents of each region start infected.
    """
    state = SimulationState(config, make_rng(seed))
    pos, dirs, speed, health = [], [], [], []
    for region in config.regions:
        n = region.population
        u = state.rng.random((n, 3))
        rad = region.radius * np.sqrt(u[:, 0])
        ang = 2.0 * math.pi * u[:, 1]
        head = 2.0 * math.pi * u[:, 2]
        pos.append(np.column_stack([region.center[0] + rad * np.cos(ang), region.center[1] + rad * np.sin(ang)]))
        dirs.append(np.column_stack([np.cos(head), np.sin(head)]))
        speed.append(np.full(n, region.mobility_factor))
        h = np.full(n, UNINFECTED, dtype=np.int64)
        h[: region.infected] = INFECTED
        health.append(h)
    state.pos = np.concatenate(pos) if pos else np.zeros((0, 2))
    state.dir = np.concatenate(dirs)
    state.speed = np.concatenate(speed)
    state.health = np.concatenate(health)
    state.since = np.where(state.health == INFECTED, 0, -1).astype(np.int64)
    state.ids = np.arange(len(state.health), dtype=np.int64)
    state.initial_population = len(state.ids)
    state.refresh_regions()
    return state


def advance_agent(agent: Agent, boundaries: Sequence[BoundarySpec], effective_speed: float,
                  rng: np.random.Generator) -> tuple[Vec2, Vec2]:
    """Move a single agent; returns its new position and direction."""
    if effective_speed < 0:
        raise ValueError("effective_speed must be >= 0")
    walls = Walls(boundaries)
    pos, d = move_agents(np.array([agent.position]), np.array([agent.direction]),
                         np.array([effective_speed]), walls, rng)
    return Vec2(*pos[0].tolist()), Vec2(*d[0].tolist())


def infection_sweep(state: SimulationState, index: NeighborIndex) -> set[int]:
    """Expose every uninfected agent to each infected agent within the spread
    radius. New infections take effect after the whole sweep, so an agent
    infected now cannot transmit until the next step."""
    d = state.config.disease
    sources = np.flatnonzero(state.health == INFECTED)
    if len(sources) == 0:
        return set()
    src, members = index.pairs_within(state.pos[sources], d.spread_radius)
    targets = members[state.health[members] == UNINFECTED]
    if len(targets) == 0:
        return set()
    hit = state.rng.random(len(targets)) < d.transmission_probability
    rows = np.unique(targets[hit])
    state.health[rows] = INFECTED
    # infection dates to the step this transition produces
    state.since[rows] = state.step + 1
    return set(state.ids[rows].tolist())


def progression_sweep(state: SimulationState) -> tuple[list[int], list[int]]:
    """Kill checks then cures for agents infected before this step.

    Infection age counts the steps completed since infection, including this
    one. A check happens whenever the age is a multiple of the kill check
    interval; survivors whose age reached the cure period become immune.
    """
    d = state.config.disease
    age = state.step + 1 - state.since
    sick = (state.health == INFECTED) & (age >= 1)
    checked = np.flatnonzero(sick & (age % d.kill_check_interval == 0))
    dies = checked[state.rng.random(len(checked)) < d.kill_probability]
    cured_mask = sick & (age >= d.cure_period)
    cured_mask[dies] = False
    cured = np.flatnonzero(cured_mask)
    state.health[cured] = IMMUNE
    state.since[cured] = -1
    cured_ids = state.ids[cured].tolist()
    dead_ids = state.ids[dies].tolist()
    if len(dies):
        np.add.at(state.dead_per_region, state.region[dies], 1)
        state.remove(dies)
    return dead_ids, cured_ids


def step(state: SimulationState) -> SimulationState:
    """One time step, in place: lockdown flags, dose events, movement,
    transmission, then death and cure."""
    cfg = state.config
    stats = state.stats()
    state.lockdown = update_lockdowns(stats, state.lockdown, cfg.lockdown)
    for kind, params in ((VACCINE, cfg.vaccine), (MEDICINE, cfg.medicine)):
        if distribution_due(state.step, params):
            alloc = allocate_doses(params.mechanism, params.quantity, stats, kind)
            used = apply_doses(state, alloc, state.rng)
            log.debug("step %d: %s %d/%d doses", state.step, kind, used, params.quantity)
            stats = state.stats()

    locked = np.array(state.lockdown, dtype=bool)
    speed = state.speed
    if locked.any():
        speed = np.where(locked[state.region], speed * cfg.lockdown.mobility_multiplier, speed)
    state.pos, state.dir = move_agents(state.pos, state.dir, speed, state.walls, state.rng)
    state.refresh_regions()

    index = NeighborIndex(state.ids, state.pos, cfg.disease.spread_radius)
    infection_sweep(state, index)
    progression_sweep(state)
    state.step += 1
    return state


def run(config: ScenarioConfig, seed: int, max_steps: int | None = None,
        observer: Callable[[SimulationState], None] | None = None) -> tuple[TimeSeries, Summary]:
    """Step until no one is infected or the step cap is hit.

    A snapshot is recorded for the initial state and after every step.
    """
    limit = config.max_steps if max_steps is None else max_steps
    state = init_state(config, seed)
    series = TimeSeries(tuple(r.id for r in config.regions))
    series.record(state.step, snapshot_rows(state))
    while state.count(INFECTED) > 0 and state.step < limit:
        step(state)
        series.record(state.step, snapshot_rows(state))
        if observer is not None:
            observer(state)
    truncated = state.count(INFECTED) > 0
    if truncated:
        log.info("seed %d: stopped at the %d-step cap with %d infected", seed, limit, state.count(INFECTED))
    summary = Summary(
        initial_population=state.initial_population,
        simulation_period=state.step,
        total_immune=state.count(IMMUNE),
        total_dead=int(state.dead_per_region.sum()),
        truncated=truncated,
    )
    return series, summary
