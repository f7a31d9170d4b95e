"""Shared builders for synthetic auction instances."""

import numpy as np

from d2dauction.geometry import LinkGains
from d2dauction.rates import ValuationTable, enumerate_packages


def make_table(values, num_pairs=None, standalone=None):
    """Valuation table from an explicit (C, N) value matrix.

    Columns follow the bitmask package enumeration; the raw package rates
    are back-filled so the table stays internally consistent.
    """
    values = np.asarray(values, dtype=float)
    C, N = values.shape
    if num_pairs is None:
        num_pairs = int(np.log2(N + 1))
        assert (1 << num_pairs) - 1 == N, "values must cover all 2^D - 1 packages"
    packages = enumerate_packages(num_pairs)
    assert len(packages) == N
    if standalone is None:
        standalone = np.zeros(C)
    package_rate = standalone[:, None] + values
    return ValuationTable(packages=packages, num_pairs=num_pairs, values=values,
                          standalone=np.asarray(standalone, dtype=float),
                          package_rate=package_rate)


def random_table(rng, num_bidders, num_pairs, scale=10.0, zero_fraction=0.3):
    """Random non-negative valuation table for mechanism stress tests."""
    n = (1 << num_pairs) - 1
    values = rng.uniform(0.0, scale, size=(num_bidders, n))
    values[rng.uniform(size=values.shape) < zero_fraction] = 0.0
    return make_table(values, num_pairs=num_pairs)


def make_gains(g_bs_cell, g_bs_d2drx, g_d2d_self, g_d2d_cell, g_d2d_cross):
    """LinkGains from plain lists, for hand-built rate instances."""
    return LinkGains(g_bs_cell=np.asarray(g_bs_cell, dtype=float),
                     g_bs_d2drx=np.asarray(g_bs_d2drx, dtype=float),
                     g_d2d_self=np.asarray(g_d2d_self, dtype=float),
                     g_d2d_cell=np.asarray(g_d2d_cell, dtype=float),
                     g_d2d_cross=np.asarray(g_d2d_cross, dtype=float))
