"""Lockdown hysteresis and vaccine/medicine allocation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scenario import MECHANISMS, DistributionParams, LockdownParams

UNINFECTED, INFECTED, IMMUNE = 0, 1, 2

VACCINE = "vaccine"
MEDICINE = "medicine"


@dataclass(frozen=True)
class RegionStats:
    region_index: int
    uninfected: int
    infected: int
    immune: int

    @property
    def total(self) -> int:
        return self.uninfected + self.infected + self.immune


@dataclass(frozen=True)
class DoseAllocation:
    per_region: tuple[int, ...]
    kind: str

    @property
    def total(self) -> int:
        return sum(self.per_region)


def region_stats(region: np.ndarray, health: np.ndarray, n_regions: int) -> list[RegionStats]:
    """Count live agents per region by health state."""
    counts = np.bincount(region * 3 + health, minlength=3 * n_regions).reshape(n_regions, 3)
    return [RegionStats(i, int(u), int(f), int(m)) for i, (u, f, m) in enumerate(counts.tolist())]


def update_lockdowns(stats: Sequence[RegionStats], flags: Sequence[bool], params: LockdownParams) -> list[bool]:
    """Lock above the start ratio, unlock below the end ratio, else hold."""
    if not params.enabled:
        return [False] * len(stats)
    out = []
    for s, locked in zip(stats, flags):
        ratio = s.infected / s.total if s.total else 0.0
        if not locked and ratio > params.start_threshold:
            locked = True
        elif locked and ratio < params.end_threshold:
            locked = False
        out.append(bool(locked))
    return out


def distribution_due(step: int, params: DistributionParams) -> bool:
    return (
        params.quantity > 0
        and step >= params.start_time
        and (step - params.start_time) % params.frequency == 0
    )


def largest_remainder(quantity: int, weights: Sequence[int]) -> list[int]:
    """Split ``quantity`` proportionally to integer ``weights`` (Hamilton method).

    Exact integer arithmetic; leftover units go to the largest fractional
    parts, ties to the lowest index. All-zero weights give all zeros.
    """
    total = sum(weights)
    if total == 0 or quantity == 0:
        return [0] * len(weights)
    shares = [divmod(quantity * w, total) for w in weights]
    out = [q for q, _ in shares]
    leftover = quantity - sum(out)
    ranked = sorted(range(len(weights)), key=lambda i: (-shares[i][1], i))
    for i in ranked[:leftover]:
        out[i] += 1
    return out


def _equitable(quantity: int, weights: list[int], eligible: list[int]) -> list[int]:
    alloc = largest_remainder(quantity, weights)
    surplus = 0
    for i, cap in enumerate(eligible):
        if alloc[i] > cap:
            surplus += alloc[i] - cap
            alloc[i] = cap
    if surplus:
        open_weights = [w if alloc[i] < eligible[i] else 0 for i, w in enumerate(weights)]
        extra = largest_remainder(surplus, open_weights)
        # whatever still exceeds a cap after this pass is discarded
        alloc = [min(a + e, cap) for a, e, cap in zip(alloc, extra, eligible)]
    return alloc


_PRIORITY = {
    "maximumInfection": lambda s: s.infected,
    "maximumUninfected": lambda s: s.uninfected,
    "infectedAndUninfected": lambda s: s.infected + s.uninfected,
}


def allocate_doses(mechanism: str, quantity: int, stats: Sequence[RegionStats], kind: str) -> DoseAllocation:
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    if kind not in (VACCINE, MEDICINE):
        raise ValueError(f"unknown dose kind {kind!r}")
    eligible = [s.uninfected if kind == VACCINE else s.infected for s in stats]
    if mechanism == "equitable":
        # weight equals eligibility for both kinds: uninfected for vaccine,
        # infected for medicine
        return DoseAllocation(tuple(_equitable(quantity, list(eligible), eligible)), kind)

    key = _PRIORITY[mechanism]
    order = sorted(range(len(stats)), key=lambda i: (-key(stats[i]), i))
    alloc = [0] * len(stats)
    remaining = quantity
    for i in order:
        if remaining <= 0:
            break
        alloc[i] = min(eligible[i], remaining)
        remaining -= alloc[i]
    return DoseAllocation(tuple(alloc), kind)


def apply_doses(state, alloc: DoseAllocation, rng: np.random.Generator) -> int:
    """Administer an allocation to randomly chosen eligible agents.

    Vaccines turn uninfected agents immune; medicine turns infected agents
    back to uninfected with no immunity. Within a region the recipients are a
    Fisher-Yates prefix over the eligible agents in id order.
    """
    target = UNINFECTED if alloc.kind == VACCINE else INFECTED
    result = IMMUNE if alloc.kind == VACCINE else UNINFECTED
    consumed = 0
    for r, doses in enumerate(alloc.per_region):
        if doses <= 0:
            continue
        pool = np.flatnonzero((state.region == r) & (state.health == target))
        n = len(pool)
        k = min(doses, n)
        for i in range(k):
            j = i + int(rng.random() * (n - i))
            pool[i], pool[j] = pool[j], pool[i]
        chosen = pool[:k]
        state.health[chosen] = result
        state.since[chosen] = -1
        consumed += k
    return consumed
