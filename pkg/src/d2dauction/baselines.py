"""Benchmark allocators: exhaustive optimum, random assignment, and the
one-pair-per-channel reduced auction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .auction import AuctionConfig, AuctionOutcome, overall_gain, run_auction
from .geometry import LinkGains, Scenario
from .rates import (PackageId, Powers, ValuationTable, package_channel_rate,
                    restrict_to_singletons)

MAX_EXHAUSTIVE_PAIRS = 12
MAX_EXHAUSTIVE_BIDDERS = 8


@dataclass(frozen=True)
class AllocationResult:
    """A feasible allocation with its total (clamped for the optimisers,
    raw for random) value gain."""

    allocation: dict[int, PackageId]
    gain: float
    algorithm: str
    rounds: int = 0
    outcome: AuctionOutcome | None = None


def _guard(valuations: ValuationTable, allow_large: bool) -> None:
    if allow_large:
        return
    if valuations.num_pairs > MAX_EXHAUSTIVE_PAIRS \
            or valuations.num_bidders > MAX_EXHAUSTIVE_BIDDERS:
        raise ValueError(
            f"exhaustive search refused for C={valuations.num_bidders}, "
            f"D={valuations.num_pairs}; pass allow_large=True to override")


def solve_cap_exhaustive(valuations: ValuationTable,
                         allow_large: bool = False) -> AllocationResult:
    """Globally optimal assignment of disjoint packages to bidders.

    Dynamic programme over (bidder suffix, set of used items): h[c][S] is
    the best total value bidders c.. can add when the items in S are gone.
    Exploring packages per state covers exactly the feasible allocations
    (at most one package per bidder, no item sold twice, pairs may stay
    unserved).  The forward reconstruction takes, per bidder, the smallest
    choice (no package first, then ascending package masks) that preserves
    the optimum, which yields the lexicographically smallest optimal
    assignment.
    """
    _guard(valuations, allow_large)
    C = valuations.num_bidders
    D = valuations.num_pairs
    masks = valuations.masks
    values = valuations.values
    n_states = 1 << D
    states = np.arange(n_states)

    h = np.zeros((C + 1, n_states))
    for c in range(C - 1, -1, -1):
        hc = h[c + 1].copy()
        for k in range(valuations.num_packages):
            val = values[c, k]
            if val <= 0:
                continue
            m = int(masks[k])
            free = np.flatnonzero((states & m) == 0)
            hc[free] = np.maximum(hc[free], val + h[c + 1][free | m])
        h[c] = hc

    allocation: dict[int, PackageId] = {}
    used = 0
    for c in range(C):
        target = h[c][used]
        if h[c + 1][used] == target:
            continue
        chosen = None
        for k in range(valuations.num_packages):
            val = values[c, k]
            m = int(masks[k])
            if val <= 0 or (m & used):
                continue
            if val + h[c + 1][used | m] == target:
                chosen = k
                break
        if chosen is None:
            raise RuntimeError("optimal allocation reconstruction failed")
        allocation[c] = valuations.packages[chosen]
        used |= int(masks[chosen])

    return AllocationResult(allocation=allocation, gain=float(h[0][0]),
                            algorithm="exhaustive")


def solve_cap_bruteforce(valuations: ValuationTable) -> AllocationResult:
    """Slow cross-check: enumerate every item -> (bidder or unserved) map.

    Kept deliberately independent of the dynamic programme; only usable on
    toy sizes since it walks (C+1)^D assignments.
    """
    C = valuations.num_bidders
    D = valuations.num_pairs
    if (C + 1) ** D > 2_000_000:
        raise ValueError("brute force is for toy instances only")
    by_mask = valuations.mask_index

    best_gain = 0.0
    best_groups: dict[int, int] = {}
    # choice 0 = unserved, choice c+1 = bidder c; the all-zero assignment
    # comes first so ties keep the empty allocation.
    for assign in itertools.product(range(C + 1), repeat=D):
        groups: dict[int, int] = {}
        for d, choice in enumerate(assign):
            if choice:
                groups[choice - 1] = groups.get(choice - 1, 0) | (1 << d)
        gain = 0.0
        ok = True
        for c, mask in groups.items():
            k = by_mask.get(mask)
            if k is None:  # package outside a capped universe
                ok = False
                break
            gain += valuations.values[c, k]
        if ok and gain > best_gain:
            best_gain = gain
            best_groups = groups

    allocation = {c: valuations.packages[by_mask[mask]]
                  for c, mask in best_groups.items()}
    return AllocationResult(allocation=allocation, gain=float(best_gain),
                            algorithm="exhaustive")


def random_allocation(valuations: ValuationTable, rng: np.random.Generator,
                      gains: LinkGains | None = None,
                      scenario: Scenario | None = None) -> AllocationResult:
    """Assign every pair to a uniformly random resource unit.

    All pairs get served, so the gain uses the raw (unclamped) rate deltas
    and can be negative; that is the point of the comparison.  If a formed
    package falls outside a capped valuation table, its rate is evaluated
    directly from ``gains`` and ``scenario``.
    """
    C = valuations.num_bidders
    D = valuations.num_pairs
    if D == 0:
        return AllocationResult(allocation={}, gain=0.0, algorithm="random")
    homes = rng.integers(0, C, size=D)
    groups: dict[int, int] = {}
    for d in range(D):
        c = int(homes[d])
        groups[c] = groups.get(c, 0) | (1 << d)

    allocation: dict[int, PackageId] = {}
    gain = 0.0
    for c, mask in sorted(groups.items()):
        k = valuations.mask_index.get(mask)
        if k is not None:
            allocation[c] = valuations.packages[k]
            gain += float(valuations.package_rate[c, k] - valuations.standalone[c])
        else:
            if gains is None or scenario is None:
                raise ValueError(
                    "random package outside the capped table; pass gains and "
                    "scenario so its rate can be evaluated directly")
            members = tuple(d for d in range(D) if mask >> d & 1)
            pkg = PackageId(index=0xFFFF, members=members)
            rate = package_channel_rate(c, pkg, gains, Powers.from_scenario(scenario))
            allocation[c] = pkg
            gain += rate - float(valuations.standalone[c])

    return AllocationResult(allocation=allocation, gain=gain, algorithm="random")


def run_reduced_rica(valuations: ValuationTable,
                     config: AuctionConfig) -> AllocationResult:
    """The same price process over the singleton packages only, so each
    channel hosts at most one pair."""
    singles = restrict_to_singletons(valuations)
    outcome = run_auction(singles, config)
    gain = overall_gain(outcome, singles)
    return AllocationResult(allocation=dict(outcome.allocation), gain=gain,
                            algorithm="reduced_rica", rounds=outcome.rounds,
                            outcome=outcome)
