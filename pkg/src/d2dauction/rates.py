"""SINR, Shannon rates, package channel rates, and bidder valuations.

A "package" is a non-empty subset of D2D pairs that share one cellular
user's downlink resources.  The value of hosting a package is the change
in the channel's total rate relative to serving the cellular user alone,
clamped at zero:

    value(c, k) = max(rate_with_package(c, k) - standalone_rate(c), 0)

Rates are spectral efficiencies in bits/s/Hz; multiply by the sub-carrier
bandwidth for absolute figures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import LinkGains, Scenario


@dataclass(frozen=True)
class PackageId:
    """One package: a 1-based enumeration index plus its member pairs."""

    index: int
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a package must contain at least one pair")
        if list(self.members) != sorted(set(self.members)):
            raise ValueError("members must be sorted and distinct")
        if self.members[0] < 0:
            raise ValueError("pair indices are 0-based and non-negative")

    @property
    def mask(self) -> int:
        m = 0
        for d in self.members:
            m |= 1 << d
        return m

    @property
    def size(self) -> int:
        return len(self.members)


def _members_of_mask(mask: int) -> tuple[int, ...]:
    return tuple(d for d in range(mask.bit_length()) if mask >> d & 1)


def enumerate_packages(num_pairs: int, max_size: int | None = None) -> tuple[PackageId, ...]:
    """All non-empty subsets of the D2D pairs, in bitmask order.

    Without a size cap there are 2^D - 1 packages.  ``max_size`` caps the
    member count for large D; singletons always survive the cap.
    """
    if num_pairs < 0:
        raise ValueError("num_pairs must be >= 0")
    packages = []
    for mask in range(1, 1 << num_pairs):
        members = _members_of_mask(mask)
        if max_size is not None and len(members) > max_size:
            continue
        packages.append(PackageId(index=len(packages) + 1, members=members))
    return tuple(packages)


@dataclass(frozen=True)
class Powers:
    """Transmit and noise powers in watts, as the rate formulas need them."""

    p_bs: float
    p_d2d: np.ndarray  # (D,)
    noise_power: float

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "Powers":
        return cls(p_bs=scenario.p_bs, p_d2d=scenario.p_d2d,
                   noise_power=scenario.noise_power)


def sinr(signal_power: float, interference_power: float, noise_power: float) -> float:
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    if signal_power < 0 or interference_power < 0:
        raise ValueError("powers must be non-negative")
    return signal_power / (interference_power + noise_power)


def shannon_rate(sinr_value: float) -> float:
    if sinr_value < 0:
        raise ValueError("SINR must be non-negative")
    return math.log2(1.0 + sinr_value)


def standalone_rate(c: int, gains: LinkGains, powers: Powers) -> float:
    """Rate of cellular user c with no co-channel D2D interference."""
    return shannon_rate(sinr(powers.p_bs * gains.g_bs_cell[c], 0.0,
                             powers.noise_power))


def cellular_package_rate(c: int, package: PackageId, gains: LinkGains,
                          powers: Powers) -> float:
    """Rate of cellular user c while hosting every pair in the package."""
    interference = sum(powers.p_d2d[d] * gains.g_d2d_cell[d, c]
                       for d in package.members)
    return shannon_rate(sinr(powers.p_bs * gains.g_bs_cell[c], interference,
                             powers.noise_power))


def d2d_rate_in_package(d: int, package: PackageId, gains: LinkGains,
                        powers: Powers) -> float:
    """Rate of pair d inside the package: the base station interferes at
    full power, plus every co-packaged pair's transmitter."""
    if d not in package.members:
        raise ValueError(f"pair {d} is not a member of package {package.members}")
    interference = powers.p_bs * gains.g_bs_d2drx[d]
    interference += sum(powers.p_d2d[o] * gains.g_d2d_cross[o, d]
                        for o in package.members if o != d)
    return shannon_rate(sinr(powers.p_d2d[d] * gains.g_d2d_self[d],
                             interference, powers.noise_power))


def package_channel_rate(c: int, package: PackageId, gains: LinkGains,
                         powers: Powers) -> float:
    """Total rate of the channel shared by cellular user c and the package."""
    total = cellular_package_rate(c, package, gains, powers)
    total += sum(d2d_rate_in_package(d, package, gains, powers)
                 for d in package.members)
    return total


@dataclass(frozen=True, eq=False)
class ValuationTable:
    """Per-bidder package values plus the raw rates behind them.

    ``values[c, k]`` is the clamped rate gain of bidder (resource unit) c
    hosting package k; ``package_rate[c, k]`` the unclamped shared-channel
    rate; ``standalone[c]`` the interference-free rate.
    """

    packages: tuple[PackageId, ...]
    num_pairs: int
    values: np.ndarray        # (C, N)
    standalone: np.ndarray    # (C,)
    package_rate: np.ndarray  # (C, N)

    def __post_init__(self) -> None:
        C, N = self.values.shape
        if len(self.packages) != N or self.standalone.shape != (C,) \
                or self.package_rate.shape != (C, N):
            raise ValueError("inconsistent table shapes")
        if np.any(self.values < 0):
            raise ValueError("values must be clamped at zero")
        expected = np.maximum(self.package_rate - self.standalone[:, None], 0.0)
        if not np.allclose(self.values, expected, rtol=1e-9, atol=1e-12):
            raise ValueError("values must equal max(package_rate - standalone, 0)")

    @property
    def num_bidders(self) -> int:
        return self.values.shape[0]

    @property
    def num_packages(self) -> int:
        return len(self.packages)

    @cached_property
    def masks(self) -> np.ndarray:
        return np.array([p.mask for p in self.packages], dtype=np.int64)

    @cached_property
    def mask_index(self) -> dict[int, int]:
        return {p.mask: i for i, p in enumerate(self.packages)}

    @cached_property
    def incidence(self) -> np.ndarray:
        """(N, D) boolean membership matrix."""
        inc = np.zeros((self.num_packages, self.num_pairs), dtype=bool)
        for i, p in enumerate(self.packages):
            inc[i, list(p.members)] = True
        return inc

    def singleton_value(self, d: int) -> np.ndarray:
        """Column of values for the singleton package {d}."""
        k = self.mask_index.get(1 << d)
        if k is None:
            raise KeyError(f"singleton package for pair {d} not in table")
        return self.values[:, k]


def _subset_sums(weights: np.ndarray, num_pairs: int) -> np.ndarray:
    """For each bitmask, the sum of ``weights`` rows over its set bits.

    ``weights`` is (D, W); the result is (2^D, W).
    """
    n = 1 << num_pairs
    out = np.zeros((n, weights.shape[1]))
    for mask in range(1, n):
        low = mask & -mask
        out[mask] = out[mask ^ low] + weights[low.bit_length() - 1]
    return out


def build_valuation_table(scenario: Scenario, gains: LinkGains,
                          packages: tuple[PackageId, ...]) -> ValuationTable:
    """Evaluate every (bidder, package) rate in one vectorised pass.

    Agrees with the per-entry scalar operations to float precision; the
    subset-sum recursion only reorders additions of the same interference
    terms.
    """
    if not packages:
        raise ValueError("package set must be non-empty")
    if len({p.mask for p in packages}) != len(packages):
        raise ValueError("packages must be distinct")
    powers = Powers.from_scenario(scenario)
    C, D = gains.num_cellular, gains.num_d2d
    noise = powers.noise_power

    # Interference received by each cellular user from each package.
    into_cell = powers.p_d2d[:, None] * gains.g_d2d_cell          # (D, C)
    cell_interf = _subset_sums(into_cell, D)                      # (2^D, C)
    # Interference received by each D2D receiver from co-packaged pairs.
    cross = powers.p_d2d[:, None] * gains.g_d2d_cross             # (D, D), zero diagonal
    d2d_interf = _subset_sums(cross, D)                           # (2^D, D)

    all_masks = np.arange(1 << D)
    member = (all_masks[:, None] >> np.arange(D)[None, :] & 1).astype(bool)

    cell_signal = powers.p_bs * gains.g_bs_cell                   # (C,)
    cell_rate = np.log2(1.0 + cell_signal[None, :] / (cell_interf + noise))
    d2d_signal = powers.p_d2d * gains.g_d2d_self                  # (D,)
    bs_interf = powers.p_bs * gains.g_bs_d2drx                    # (D,)
    pair_rate = np.log2(1.0 + d2d_signal[None, :]
                        / (bs_interf[None, :] + d2d_interf + noise))
    d2d_sum = (pair_rate * member).sum(axis=1)                    # (2^D,)

    masks = np.array([p.mask for p in packages])
    package_rate = (cell_rate[masks, :] + d2d_sum[masks, None]).T  # (C, N)
    standalone = cell_rate[0, :].copy()                            # mask 0: no interference
    values = np.maximum(package_rate - standalone[:, None], 0.0)

    return ValuationTable(packages=tuple(packages), num_pairs=D, values=values,
                          standalone=standalone, package_rate=package_rate)


def restrict_to_singletons(table: ValuationTable) -> ValuationTable:
    """Sub-table keeping only the single-pair packages, re-indexed."""
    keep = [i for i, p in enumerate(table.packages) if p.size == 1]
    keep.sort(key=lambda i: table.packages[i].members[0])
    packages = tuple(PackageId(index=j + 1, members=table.packages[i].members)
                     for j, i in enumerate(keep))
    return ValuationTable(packages=packages, num_pairs=table.num_pairs,
                          values=table.values[:, keep],
                          standalone=table.standalone.copy(),
                          package_rate=table.package_rate[:, keep])


class FeasibilityError(ValueError):
    """Raised when an allocation assigns one pair to several bidders."""


def system_sum_rate(allocation: dict[int, PackageId | None], gains: LinkGains,
                    powers: Powers) -> float:
    """Downlink sum rate of the whole cell under an allocation.

    Every cellular user contributes its channel rate (standalone if it
    hosts nothing); every allocated pair contributes its in-package rate.
    Bidders absent from the mapping host nothing.
    """
    seen: set[int] = set()
    for pkg in allocation.values():
        if pkg is None:
            continue
        overlap = seen.intersection(pkg.members)
        if overlap:
            raise FeasibilityError(f"pairs {sorted(overlap)} allocated twice")
        seen.update(pkg.members)

    total = 0.0
    for c in range(gains.num_cellular):
        pkg = allocation.get(c)
        if pkg is None:
            total += standalone_rate(c, gains, powers)
        else:
            total += package_channel_rate(c, pkg, gains, powers)
    return total
