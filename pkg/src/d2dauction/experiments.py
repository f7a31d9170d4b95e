"""Per-drop pipeline, efficiency metrics, and Monte Carlo sweeps.

One drop = one seeded realisation of user positions and channel gains, on
which all four allocators run against the same valuation table:

    exhaustive  - optimal assignment (upper bound)
    rica        - the full package auction
    reduced_rica- the auction restricted to one pair per channel
    random      - uniform pair-to-channel assignment

Two efficiency measures are reported: eta compares system sum rates
against the exhaustive optimum, and the allocating efficiency compares
total value gains.  Every drop also cross-checks the sum rate computed
directly from the link budget against the table-based decomposition, and
asserts the dominance and mechanism invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .auction import (AuctionConfig, InvariantViolation, PriceEvent,
                      overall_gain, run_auction)
from .baselines import (AllocationResult, random_allocation, run_reduced_rica,
                        solve_cap_exhaustive)
from .geometry import (CellConfig, DEFAULT_BS_POWER_W, DEFAULT_DEVICE_POWER_W,
                       DEFAULT_NOISE_W, build_link_gains, place_users)
from .rates import (Powers, build_valuation_table, enumerate_packages,
                    package_channel_rate, system_sum_rate)

ALGORITHMS = ("exhaustive", "rica", "reduced_rica", "random")
_REL_TOL = 1e-9


@dataclass(frozen=True)
class DropConfig:
    """Everything a drop needs besides its user counts and seed."""

    cell: CellConfig = CellConfig()
    auction: AuctionConfig = AuctionConfig()
    p_bs_watts: float = DEFAULT_BS_POWER_W
    p_d2d_watts: float = DEFAULT_DEVICE_POWER_W
    noise_watts: float = DEFAULT_NOISE_W
    max_package_size: int | None = None
    allow_large_exhaustive: bool = False


@dataclass(frozen=True)
class DropResult:
    seed: int
    num_cellular: int
    num_d2d: int
    sum_rate: dict[str, float]        # bits/s/Hz per algorithm
    gain: dict[str, float]
    eta: dict[str, float]             # sum-rate ratio vs exhaustive
    efficiency: dict[str, float]      # gain ratio vs exhaustive
    rounds: dict[str, int]
    baseline_sum_rate: float          # no D2D admitted at all
    price_history: tuple[PriceEvent, ...]


@dataclass(frozen=True)
class SweepSpec:
    """One swept variable over a value list, everything else fixed."""

    variable: str                     # num_d2d_pairs | num_resource_units
    values: tuple[int, ...]
    drops_per_point: int
    num_cellular: int                 # used when sweeping num_d2d_pairs
    num_d2d: int                      # used when sweeping num_resource_units
    base: DropConfig = DropConfig()

    def __post_init__(self) -> None:
        if self.variable not in ("num_d2d_pairs", "num_resource_units"):
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if not self.values:
            raise ValueError("sweep range must be non-empty")
        if self.drops_per_point < 1:
            raise ValueError("drops_per_point must be >= 1")

    def counts_at(self, value: int) -> tuple[int, int]:
        if self.variable == "num_d2d_pairs":
            return self.num_cellular, value
        return value, self.num_d2d


@dataclass(frozen=True)
class SweepPointSummary:
    variable: str
    value: int
    algorithm: str
    mean_sum_rate: float
    std_sum_rate: float
    mean_eta: float
    mean_efficiency: float
    mean_rounds: float
    drops: int


@dataclass(frozen=True)
class MonteCarloResult:
    summaries: tuple[SweepPointSummary, ...]
    drops: tuple[tuple[int, DropResult], ...] = field(repr=False)  # (point value, drop)


def allocating_efficiency(outcome_gain: float, optimal_gain: float) -> float:
    """Gain ratio in [0, 1]; the 0/0 case counts as fully efficient."""
    if outcome_gain < 0 or optimal_gain < 0:
        raise ValueError("gains must be non-negative")
    if outcome_gain > optimal_gain * (1 + _REL_TOL) + 1e-12:
        raise InvariantViolation(
            f"allocation gain {outcome_gain} exceeds the optimum {optimal_gain}")
    if optimal_gain == 0:
        return 1.0
    return min(outcome_gain / optimal_gain, 1.0)


def _safe_ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else float("inf")
    return num / den


def _dominance(label: str, upper: float, lower: float) -> None:
    if upper < lower - _REL_TOL * max(1.0, abs(upper)):
        raise InvariantViolation(f"{label}: {upper} < {lower}")


def run_drop(num_cellular: int, num_d2d: int, config: DropConfig,
             seed: int) -> DropResult:
    """Generate one drop and run all four allocators on it."""
    if num_cellular < 1 or num_d2d < 1:
        raise ValueError("need at least one cellular user and one D2D pair")
    rng = np.random.default_rng(seed)
    scenario = place_users(config.cell, num_cellular, num_d2d, rng,
                           p_bs=config.p_bs_watts, p_d2d=config.p_d2d_watts,
                           noise=config.noise_watts)
    gains = build_link_gains(scenario, config.cell, rng)
    packages = enumerate_packages(num_d2d, config.max_package_size)
    table = build_valuation_table(scenario, gains, packages)
    powers = Powers.from_scenario(scenario)

    exhaustive = solve_cap_exhaustive(table, allow_large=config.allow_large_exhaustive)
    outcome = run_auction(table, config.auction)
    rica = AllocationResult(allocation=dict(outcome.allocation),
                            gain=overall_gain(outcome, table),
                            algorithm="rica", rounds=outcome.rounds,
                            outcome=outcome)
    reduced = run_reduced_rica(table, config.auction)
    rand = random_allocation(table, rng, gains=gains, scenario=scenario)
    results = {"exhaustive": exhaustive, "rica": rica,
               "reduced_rica": reduced, "random": rand}

    baseline = system_sum_rate({}, gains, powers)
    sum_rate: dict[str, float] = {}
    for name, res in results.items():
        direct = system_sum_rate(res.allocation, gains, powers)
        # The sum rate must decompose as baseline + unclamped gain deltas.
        decomposed = baseline
        for c, pkg in res.allocation.items():
            k = table.mask_index.get(pkg.mask)
            if k is None:  # capped-out random package: evaluate it directly
                decomposed += (package_channel_rate(c, pkg, gains, powers)
                               - float(table.standalone[c]))
            else:
                decomposed += float(table.package_rate[c, k] - table.standalone[c])
        if abs(direct - decomposed) > _REL_TOL * max(1.0, abs(direct)):
            raise InvariantViolation(
                f"{name}: sum rate {direct} disagrees with decomposition "
                f"{decomposed}")
        sum_rate[name] = direct

    _dominance("exhaustive gain vs rica", exhaustive.gain, rica.gain)
    _dominance("exhaustive gain vs reduced", exhaustive.gain, reduced.gain)
    _dominance("rica gain non-negative", rica.gain, 0.0)
    for name in ("rica", "reduced_rica", "random"):
        _dominance(f"exhaustive sum rate vs {name}",
                   sum_rate["exhaustive"], sum_rate[name])

    eta = {name: _safe_ratio(sum_rate[name], sum_rate["exhaustive"])
           for name in ALGORITHMS}
    efficiency = {
        "exhaustive": allocating_efficiency(exhaustive.gain, exhaustive.gain),
        "rica": allocating_efficiency(rica.gain, exhaustive.gain),
        "reduced_rica": allocating_efficiency(reduced.gain, exhaustive.gain),
        # random gains may be negative, so report the raw ratio.
        "random": _safe_ratio(rand.gain, exhaustive.gain),
    }
    for name in ("exhaustive", "rica", "reduced_rica"):
        if not 0.0 <= efficiency[name] <= 1.0:
            raise InvariantViolation(f"efficiency of {name} outside [0, 1]")

    rounds = {"exhaustive": 0, "rica": outcome.rounds,
              "reduced_rica": reduced.rounds, "random": 0}
    return DropResult(seed=seed, num_cellular=num_cellular, num_d2d=num_d2d,
                      sum_rate=sum_rate, gain={n: results[n].gain for n in ALGORITHMS},
                      eta=eta, efficiency=efficiency, rounds=rounds,
                      baseline_sum_rate=baseline,
                      price_history=outcome.price_history)


def drop_seed(master_seed: int, point_index: int, drop_index: int) -> int:
    """Fixed master-seed schedule; stable across runs and platforms."""
    seq = np.random.SeedSequence([master_seed, point_index, drop_index])
    return int(seq.generate_state(1, np.uint64)[0])


def summarize_point(variable: str, value: int, drops) -> list[SweepPointSummary]:
    """Reduce one sweep point; drops are sorted by seed first so the
    result does not depend on completion order."""
    ordered = sorted(drops, key=lambda r: r.seed)
    rows = []
    for name in ALGORITHMS:
        rates = np.array([r.sum_rate[name] for r in ordered])
        rows.append(SweepPointSummary(
            variable=variable, value=value, algorithm=name,
            mean_sum_rate=float(rates.mean()),
            std_sum_rate=float(rates.std()),
            mean_eta=float(np.mean([r.eta[name] for r in ordered])),
            mean_efficiency=float(np.mean([r.efficiency[name] for r in ordered])),
            mean_rounds=float(np.mean([r.rounds[name] for r in ordered])),
            drops=len(ordered)))
    return rows


def monte_carlo(spec: SweepSpec, master_seed: int = 0) -> MonteCarloResult:
    """Independent seeded drops at every sweep point, then per-point
    means and standard deviations."""
    summaries: list[SweepPointSummary] = []
    all_drops: list[tuple[int, DropResult]] = []
    for point_index, value in enumerate(spec.values):
        C, D = spec.counts_at(value)
        drops = [run_drop(C, D, spec.base, drop_seed(master_seed, point_index, j))
                 for j in range(spec.drops_per_point)]
        summaries.extend(summarize_point(spec.variable, value, drops))
        all_drops.extend((value, r) for r in drops)
    return MonteCarloResult(summaries=tuple(summaries), drops=tuple(all_drops))
