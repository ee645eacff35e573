"""Per-step region counts, CSV/JSON emission and wave counting."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy.signal import find_peaks

COLUMNS = ("uninfected", "infected", "immune", "dead")
CSV_HEADER = ("step", "region_id", *COLUMNS)


@dataclass(frozen=True)
class RegionSnapshot:
    step: int
    rows: tuple[tuple[int, int, int, int], ...]

    @property
    def aggregate(self) -> tuple[int, int, int, int]:
        return tuple(sum(col) for col in zip(*self.rows)) if self.rows else (0, 0, 0, 0)


@dataclass
class TimeSeries:
    """Snapshots stacked into an int array of shape (steps, regions, 4)."""

    region_ids: tuple[str, ...]
    steps: list[int] = field(default_factory=list)
    counts: list[np.ndarray] = field(default_factory=list)

    def append(self, snap: RegionSnapshot) -> None:
        self.record(snap.step, np.array(snap.rows, dtype=np.int64))

    def record(self, step: int, rows: np.ndarray) -> None:
        self.steps.append(step)
        self.counts.append(np.asarray(rows, dtype=np.int64).reshape(len(self.region_ids), 4))

    def array(self) -> np.ndarray:
        if not self.counts:
            return np.zeros((0, len(self.region_ids), 4), dtype=np.int64)
        return np.stack(self.counts)

    def aggregate(self) -> np.ndarray:
        return self.array().sum(axis=1)

    def snapshots(self) -> list[RegionSnapshot]:
        return [
            RegionSnapshot(s, tuple(tuple(int(v) for v in row) for row in c.tolist()))
            for s, c in zip(self.steps, self.counts)
        ]


@dataclass(frozen=True)
class Summary:
    initial_population: int
    simulation_period: int
    total_immune: int
    total_dead: int
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "initialPopulation": self.initial_population,
            "simulationPeriod": self.simulation_period,
            "totalImmune": self.total_immune,
            "totalDead": self.total_dead,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Summary":
        return cls(doc["initialPopulation"], doc["simulationPeriod"], doc["totalImmune"],
                   doc["totalDead"], doc.get("truncated", False))


@dataclass(frozen=True)
class WaveReport:
    wave_count: int
    peak_steps: tuple[int, ...]


def snapshot_rows(state) -> np.ndarray:
    """(regions, 4) counts: live agents by health per nearest region, then deaths."""
    n = len(state.dead_per_region)
    live = np.bincount(state.region * 3 + state.health, minlength=3 * n).reshape(n, 3)
    return np.column_stack([live, state.dead_per_region])


def take_snapshot(state) -> RegionSnapshot:
    rows = snapshot_rows(state)
    return RegionSnapshot(state.step, tuple(tuple(int(v) for v in row) for row in rows.tolist()))


def write_timeseries(snapshots: Sequence[RegionSnapshot], region_ids: Sequence[str], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for snap in snapshots:
        if len(snap.rows) != len(region_ids):
            raise ValueError("snapshot does not match the region schema")
        for rid, row in zip(region_ids, snap.rows):
            writer.writerow((snap.step, rid, *row))
        writer.writerow((snap.step, "ALL", *snap.aggregate))


def read_timeseries(source: IO[str]) -> list[dict]:
    """Parse a timeseries CSV back into dicts with integer counts."""
    out = []
    for row in csv.DictReader(source):
        out.append({k: (v if k == "region_id" else int(v)) for k, v in row.items()})
    return out


def write_summary(summary: Summary, sink: IO[str]) -> None:
    sink.write(json.dumps(summary.to_dict(), indent=2) + "\n")


def smooth(series: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average; the window shrinks near the ends."""
    if window < 1:
        raise ValueError("smoothing window must be >= 1")
    x = np.asarray(series, dtype=float)
    if len(x) == 0:
        return x
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(len(x))
    lo = np.clip(idx - half, 0, len(x))
    hi = np.clip(idx + (window - half), 0, len(x))
    return (csum[hi] - csum[lo]) / (hi - lo)


def count_waves(
    infected: Sequence[float],
    smooth_window: int = 51,
    min_prominence: float | None = None,
    *,
    population: int | None = None,
) -> WaveReport:
    """Count prominent peaks in an infected-count series.

    The series is smoothed first, then a peak counts as a wave if it rises at
    least ``min_prominence`` above the higher of its two flanking minima.
    The prominence defaults to 2% of ``population`` (one of the two must be
    given).
    """
    if min_prominence is None:
        if population is None:
            raise ValueError("need min_prominence or population")
        min_prominence = 0.02 * population
    y = smooth(infected, smooth_window)
    if len(y) < 3:
        return WaveReport(0, ())
    peaks, _ = find_peaks(y, prominence=min_prominence)
    return WaveReport(len(peaks), tuple(int(p) for p in peaks))
