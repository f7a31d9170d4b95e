"""Descending-price package auction with ascending conflict fine-tuning.

The spectrum resource units are the bidders and the D2D pairs are the
items.  Prices are linear and anonymous: a package costs the sum of its
item prices, the same for every bidder.  Each round every remaining bidder
names the package that maximises its payoff at the posted prices (or
passes), jump bids are not allowed, and:

  * if an item sits in two different bidders' packages the auctioneer
    nudges the contested item prices up by a small step ``delta / divisor``
    and re-collects all demands until the conflict clears;
  * otherwise every non-empty bid wins at the posted prices, those item
    prices freeze, and every remaining undemanded item price drops by
    ``delta``.

Item prices are represented exactly as ``base - k*delta + m*step`` with
integer counters, so long price trajectories never accumulate float error
and the "bid when value >= price" boundary behaves the way a hand
simulation does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .rates import PackageId, ValuationTable

_REL_TOL = 1e-9


class InvariantViolation(RuntimeError):
    """A mechanism guarantee failed at runtime; indicates a bug."""


@dataclass(frozen=True)
class AuctionConfig:
    """Price-dynamics knobs.

    ``initial_price_policy`` is either the string ``"above_max_singleton"``
    (open every item just above its best singleton value so round 0 is
    quiet) or a number used as a fixed scalar opening price for every item.
    """

    delta: float = 0.1
    fine_tune_divisor: int = 10
    max_fine_tune_rounds: int = 100
    initial_price_policy: str | float = "above_max_singleton"

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.fine_tune_divisor < 1 or int(self.fine_tune_divisor) != self.fine_tune_divisor:
            raise ValueError("fine_tune_divisor must be a positive integer")
        if self.max_fine_tune_rounds < 1:
            raise ValueError("max_fine_tune_rounds must be >= 1")
        if isinstance(self.initial_price_policy, str) \
                and self.initial_price_policy != "above_max_singleton":
            raise ValueError(f"unknown price policy {self.initial_price_policy!r}")

    @property
    def fine_tune_step(self) -> float:
        return self.delta / self.fine_tune_divisor


@dataclass(frozen=True, eq=False)
class PriceVector:
    """Current item prices plus their sold/frozen flags and the round index.

    ``price = base - down*delta + up*step`` per item; a descent that would
    cross zero resets the item's base to exactly zero.
    """

    base: np.ndarray   # (D,) float
    down: np.ndarray   # (D,) int, delta-sized reductions
    up: np.ndarray     # (D,) int, step-sized increases
    fixed: np.ndarray  # (D,) bool, true once sold
    delta: float
    step: float
    t: int = 0

    @classmethod
    def open_at(cls, initial: np.ndarray, delta: float, step: float) -> "PriceVector":
        n = initial.shape[0]
        return cls(base=initial.astype(float).copy(), down=np.zeros(n, dtype=np.int64),
                   up=np.zeros(n, dtype=np.int64), fixed=np.zeros(n, dtype=bool),
                   delta=delta, step=step, t=0)

    @property
    def p(self) -> np.ndarray:
        return self.base - self.down * self.delta + self.up * self.step

    def price_of(self, item: int) -> float:
        return float(self.base[item] - self.down[item] * self.delta
                     + self.up[item] * self.step)

    def _copy_arrays(self) -> dict:
        return dict(base=self.base.copy(), down=self.down.copy(),
                    up=self.up.copy(), fixed=self.fixed.copy())

    def with_fixed(self, items) -> "PriceVector":
        arrays = self._copy_arrays()
        arrays["fixed"][list(items)] = True
        return replace(self, **arrays)


def descend_prices(prices: PriceVector, undemanded_items, delta: float) -> PriceVector:
    """Lower every listed item by ``delta`` (floored at exactly zero) and
    advance the round counter."""
    if delta != prices.delta:
        raise ValueError("descend step must match the price vector's delta")
    arrays = prices._copy_arrays()
    for d in undemanded_items:
        if prices.fixed[d]:
            raise ValueError(f"item {d} is already sold")
        if prices.price_of(d) - delta <= 0:
            arrays["base"][d] = 0.0
            arrays["down"][d] = 0
            arrays["up"][d] = 0
        else:
            arrays["down"][d] += 1
    return replace(prices, **arrays, t=prices.t + 1)


def ascend_prices(prices: PriceVector, over_demanded_items, step: float) -> PriceVector:
    """Raise every contested item by the fine-tuning step; the round
    counter does not advance."""
    if step != prices.step:
        raise ValueError("ascend step must match the price vector's step")
    arrays = prices._copy_arrays()
    for d in over_demanded_items:
        if prices.fixed[d]:
            raise ValueError(f"item {d} is already sold")
        arrays["up"][d] += 1
    return replace(prices, **arrays)


def _revert_ascend(prices: PriceVector, items) -> PriceVector:
    arrays = prices._copy_arrays()
    for d in items:
        if arrays["up"][d] < 1:
            raise ValueError(f"item {d} has no ascend step to revert")
        arrays["up"][d] -= 1
    return replace(prices, **arrays)


@dataclass(frozen=True)
class Bid:
    bidder: int
    package: PackageId | None
    pay_price: float

    @property
    def is_empty(self) -> bool:
        return self.package is None


@dataclass(frozen=True)
class PriceEvent:
    """One price change for export: phase is descend, ascend or fixed."""

    event_index: int
    t: int
    item: int
    price: float
    phase: str


@dataclass
class AuctionState:
    """Mutable book-keeping while an auction runs."""

    prices: PriceVector
    active_items: set[int]
    active_bidders: set[int]
    allocation: dict[int, PackageId] = field(default_factory=dict)
    pay_prices: dict[int, float] = field(default_factory=dict)
    events: list[PriceEvent] = field(default_factory=list)
    retired: set[int] = field(default_factory=set)

    def record(self, item: int, phase: str) -> None:
        self.events.append(PriceEvent(event_index=len(self.events),
                                      t=self.prices.t, item=item,
                                      price=self.prices.price_of(item),
                                      phase=phase))


@dataclass(frozen=True)
class AuctionOutcome:
    allocation: dict[int, PackageId]
    pay_prices: dict[int, float]
    revenue: float
    utilities: np.ndarray            # (C,), zero for non-winners
    rounds: int                      # descending-price rounds used
    price_history: tuple[PriceEvent, ...]
    unsold_items: frozenset[int]
    initial_prices: np.ndarray
    final_prices: np.ndarray
    conflict_episodes: int
    max_fine_tune_iterations: int


def initial_prices(valuations: ValuationTable, config: AuctionConfig) -> PriceVector:
    """Opening prices.

    Default policy: each item opens one ``delta`` above its best singleton
    value, then all items are raised uniformly if any package could still
    attract a bid, so the auction always opens quiet.  A numeric policy
    opens every item at that fixed scalar with no adjustment.
    """
    D = valuations.num_pairs
    if valuations.num_packages == 0:
        raise ValueError("valuation table is empty")
    policy = config.initial_price_policy
    if not isinstance(policy, str):
        p0 = np.full(D, float(policy))
        return PriceVector.open_at(p0, config.delta, config.fine_tune_step)

    p0 = np.zeros(D)
    for d in range(D):
        p0[d] = valuations.singleton_value(d).max() + config.delta

    # Quiet opening: no package of any bidder may satisfy value >= price.
    sizes = valuations.incidence.sum(axis=1)
    sums = valuations.incidence.astype(float) @ p0
    margin = (valuations.values - sums[None, :]) / sizes[None, :]
    margin = np.where(valuations.values > 0, margin, -np.inf)
    worst = margin.max() if margin.size else -np.inf
    if worst >= 0:
        p0 += worst + config.delta
    return PriceVector.open_at(p0, config.delta, config.fine_tune_step)


def demand(bidder: int, prices: PriceVector, valuations: ValuationTable,
           active_items: set[int], *, price_sums: np.ndarray | None = None,
           allowed: np.ndarray | None = None) -> Bid:
    """The bidder's truthful bid at the posted prices.

    Among packages made only of active items, with positive value and
    payoff ``value - price >= 0``, pick the payoff maximiser; ties go to
    the larger value, then the smaller package index.  Bids always pay
    exactly the posted price sum (no jump bidding).
    """
    inc = valuations.incidence
    if price_sums is None:
        price_sums = inc.astype(float) @ prices.p
    if allowed is None:
        inactive = np.ones(valuations.num_pairs, dtype=bool)
        inactive[list(active_items)] = False
        allowed = ~(inc & inactive[None, :]).any(axis=1)

    v = valuations.values[bidder]
    payoff = v - price_sums
    qualifying = allowed & (v > 0) & (payoff >= 0)
    if not qualifying.any():
        return Bid(bidder=bidder, package=None, pay_price=0.0)
    best = payoff[qualifying].max()
    cand = qualifying & (payoff == best)
    vmax = v[cand].max()
    cand &= v == vmax
    k = int(np.flatnonzero(cand)[0])
    return Bid(bidder=bidder, package=valuations.packages[k],
               pay_price=float(price_sums[k]))


def detect_conflicts(bids) -> set[int]:
    """Items demanded by two or more distinct bidders this round."""
    demanders: dict[int, set[int]] = {}
    for bid in bids:
        if bid.is_empty:
            continue
        for d in bid.package.members:
            demanders.setdefault(d, set()).add(bid.bidder)
    return {d for d, who in demanders.items() if len(who) >= 2}


def fix_winners(conflict_free_bids, state: AuctionState) -> AuctionState:
    """Sell every non-empty bid at its posted price and freeze those items."""
    claimed: set[int] = set()
    for bid in conflict_free_bids:
        if bid.is_empty:
            continue
        overlap = claimed.intersection(bid.package.members)
        if overlap:
            raise ValueError(f"overlapping winning bids on items {sorted(overlap)}")
        claimed.update(bid.package.members)

    for bid in sorted(conflict_free_bids, key=lambda b: b.bidder):
        if bid.is_empty:
            continue
        state.allocation[bid.bidder] = bid.package
        state.pay_prices[bid.bidder] = bid.pay_price
        state.prices = state.prices.with_fixed(bid.package.members)
        for d in bid.package.members:
            state.record(d, "fixed")
            state.active_items.discard(d)
        state.active_bidders.discard(bid.bidder)
    return state


def _collect(state: AuctionState, valuations: ValuationTable) -> list[Bid]:
    inc = valuations.incidence
    price_sums = inc.astype(float) @ state.prices.p
    inactive = np.ones(valuations.num_pairs, dtype=bool)
    inactive[list(state.active_items)] = False
    allowed = ~(inc & inactive[None, :]).any(axis=1)
    return [demand(c, state.prices, valuations, state.active_items,
                   price_sums=price_sums, allowed=allowed)
            for c in sorted(state.active_bidders)]


def _award_lowest_bidder(state: AuctionState, bids, contested: set[int]) -> None:
    """Deadlock tie-break: sell to the lowest-indexed bidder contesting."""
    candidates = [b for b in bids
                  if not b.is_empty and contested.intersection(b.package.members)]
    if not candidates:
        raise InvariantViolation("tie-break award requested with no contestants")
    fix_winners([min(candidates, key=lambda b: b.bidder)], state)


def _resolve_conflict(state: AuctionState, valuations: ValuationTable,
                      config: AuctionConfig, bids, over: set[int]):
    """Fine-tune contested prices until the conflict clears.

    Returns ``(bids, iterations)`` when the round can continue with a
    conflict-free bid set, or ``(None, iterations)`` after a tie-break
    award (the main loop then re-collects).  If one ascend step makes every
    contestant withdraw, the step is reverted and, the conflict being back,
    the lowest-indexed contestant wins at the reverted prices.
    """
    iterations = 0
    while True:
        if iterations >= config.max_fine_tune_rounds:
            _award_lowest_bidder(state, bids, over)
            return None, iterations
        items = sorted(over)
        state.prices = ascend_prices(state.prices, items, config.fine_tune_step)
        for d in items:
            state.record(d, "ascend")
        iterations += 1
        bids = _collect(state, valuations)
        still_wanted = any(not b.is_empty and over.intersection(b.package.members)
                           for b in bids)
        if not still_wanted:
            state.prices = _revert_ascend(state.prices, items)
            for d in items:
                state.record(d, "descend")
            bids = _collect(state, valuations)
            persisting = detect_conflicts(bids)
            if persisting:
                _award_lowest_bidder(state, bids, persisting)
                return None, iterations
            return bids, iterations
        over_new = detect_conflicts(bids)
        if not over_new:
            return bids, iterations
        over = over_new


def run_auction(valuations: ValuationTable, config: AuctionConfig) -> AuctionOutcome:
    """Run the full price process until every item is sold or retired, or
    every bidder has won."""
    C = valuations.num_bidders
    D = valuations.num_pairs
    prices = initial_prices(valuations, config)
    p0 = prices.p.copy()
    state = AuctionState(prices=prices,
                         active_items=set(range(D)),
                         active_bidders=set(range(C)))

    descent_budget = int(np.ceil(p0 / config.delta).sum()) + D + 1
    guard = 10 * (descent_budget + C * (config.max_fine_tune_rounds + 2) + 100)
    episodes = 0
    max_ft = 0

    iterations = 0
    while state.active_items and state.active_bidders:
        iterations += 1
        if iterations > guard:
            raise InvariantViolation("auction failed to terminate; this is a bug")

        bids = _collect(state, valuations)
        over = detect_conflicts(bids)
        if over:
            episodes += 1
            bids, used = _resolve_conflict(state, valuations, config, bids, over)
            max_ft = max(max_ft, used)
            if bids is None:
                continue

        nonempty = [b for b in bids if not b.is_empty]
        if nonempty:
            fix_winners(nonempty, state)
        if not state.active_items or not state.active_bidders:
            break

        undemanded = sorted(state.active_items)
        at_floor = [d for d in undemanded if state.prices.price_of(d) <= 0]
        for d in at_floor:
            state.active_items.discard(d)
            state.retired.add(d)
        undemanded = [d for d in undemanded if d not in state.retired]
        if undemanded:
            state.prices = descend_prices(state.prices, undemanded, config.delta)
            for d in undemanded:
                state.record(d, "descend")

    revenue = float(sum(state.pay_prices.values()))
    utilities = np.zeros(C)
    gain = 0.0
    for c, pkg in state.allocation.items():
        value = float(valuations.values[c, valuations.mask_index[pkg.mask]])
        utilities[c] = value - state.pay_prices[c]
        gain += value

    unsold = frozenset(state.retired | state.active_items)
    outcome = AuctionOutcome(
        allocation=dict(state.allocation),
        pay_prices=dict(state.pay_prices),
        revenue=revenue,
        utilities=utilities,
        rounds=state.prices.t,
        price_history=tuple(state.events),
        unsold_items=unsold,
        initial_prices=p0,
        final_prices=state.prices.p.copy(),
        conflict_episodes=episodes,
        max_fine_tune_iterations=max_ft,
    )
    _check_outcome(outcome, valuations, config, gain)
    return outcome


def _check_outcome(outcome: AuctionOutcome, valuations: ValuationTable,
                   config: AuctionConfig, gain: float) -> None:
    claimed: set[int] = set()
    for pkg in outcome.allocation.values():
        if claimed.intersection(pkg.members):
            raise InvariantViolation("sold packages intersect")
        claimed.update(pkg.members)
    if np.any(outcome.utilities < -1e-12):
        raise InvariantViolation("a winner ended with negative payoff")
    total = outcome.revenue + float(outcome.utilities.sum())
    if not math.isclose(total, gain, rel_tol=_REL_TOL, abs_tol=1e-12):
        raise InvariantViolation(
            f"revenue + payoffs = {total} != allocated value {gain}")
    bound = int(np.ceil(outcome.initial_prices / config.delta).max()) + 1
    if outcome.rounds > bound:
        raise InvariantViolation(
            f"used {outcome.rounds} descent rounds, bound is {bound}")
    if outcome.max_fine_tune_iterations > config.max_fine_tune_rounds:
        raise InvariantViolation("fine-tune iteration budget exceeded")


def overall_gain(outcome: AuctionOutcome, valuations: ValuationTable) -> float:
    """Total allocated value; checked against revenue plus total payoff,
    which must agree because pay prices cancel out of the sum."""
    gain = 0.0
    for c, pkg in outcome.allocation.items():
        gain += float(valuations.values[c, valuations.mask_index[pkg.mask]])
    recomposed = outcome.revenue + float(outcome.utilities.sum())
    if not math.isclose(gain, recomposed, rel_tol=_REL_TOL, abs_tol=1e-12):
        raise InvariantViolation(
            f"gain identity failed: {gain} vs {recomposed}")
    return gain
