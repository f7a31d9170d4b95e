"""Spectrum allocation for D2D underlay cells via a reverse package auction.

The package simulates a single downlink cell in which device-to-device
pairs reuse cellular users' spectrum.  Resource units value packages of
pairs by the sum-rate gain they bring, and a descending-price package
auction with ascending conflict resolution allocates them.  Exhaustive,
random, and one-pair-per-channel baselines plus Monte Carlo sweeps allow
the mechanism's efficiency and convergence behaviour to be measured.
"""

from .auction import (AuctionConfig, AuctionOutcome, Bid, InvariantViolation,
                      PriceEvent, PriceVector, ascend_prices, demand,
                      descend_prices, detect_conflicts, fix_winners,
                      initial_prices, overall_gain, run_auction)
from .baselines import (AllocationResult, random_allocation, run_reduced_rica,
                        solve_cap_bruteforce, solve_cap_exhaustive)
from .experiments import (ALGORITHMS, DropConfig, DropResult, MonteCarloResult,
                          SweepPointSummary, SweepSpec, allocating_efficiency,
                          monte_carlo, run_drop)
from .geometry import (CellConfig, LinkGains, PlacementError, Scenario,
                       build_link_gains, dbm_to_watts, noise_power, path_gain,
                       place_users, sample_rayleigh_power)
from .rates import (FeasibilityError, PackageId, Powers, ValuationTable,
                    build_valuation_table, cellular_package_rate,
                    d2d_rate_in_package, enumerate_packages,
                    package_channel_rate, restrict_to_singletons, shannon_rate,
                    sinr, standalone_rate, system_sum_rate)

__version__ = "0.1.0"
