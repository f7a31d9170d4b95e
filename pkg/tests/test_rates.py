import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_gains
from d2dauction.geometry import CellConfig, build_link_gains, place_users
from d2dauction.rates import (FeasibilityError, PackageId, Powers,
                              build_valuation_table, cellular_package_rate,
                              d2d_rate_in_package, enumerate_packages,
                              package_channel_rate, restrict_to_singletons,
                              shannon_rate, sinr, standalone_rate,
                              system_sum_rate)

N0 = 1e-15


def simple_powers(num_pairs, p_bs=1e-3, p_d2d=1e-6):
    return Powers(p_bs=p_bs, p_d2d=np.full(num_pairs, p_d2d), noise_power=N0)


def reference_shared_rate(c, members, g, powers):
    """Straight-line transcription of the shared-channel rate: cellular term
    with the summed package interference plus each member's rate under the
    base station and its co-members.  Kept independent of the library
    helpers on purpose."""
    cell_interf = 0.0
    for d in members:
        cell_interf += powers.p_d2d[d] * g.g_d2d_cell[d, c]
    total = math.log2(1.0 + powers.p_bs * g.g_bs_cell[c]
                      / (cell_interf + powers.noise_power))
    for d in members:
        interf = powers.p_bs * g.g_bs_d2drx[d]
        for o in members:
            if o != d:
                interf += powers.p_d2d[o] * g.g_d2d_cross[o, d]
        total += math.log2(1.0 + powers.p_d2d[d] * g.g_d2d_self[d]
                           / (interf + powers.noise_power))
    return total


def random_gains(rng, C, D):
    cross = rng.uniform(0.1, 2.0, (D, D))
    np.fill_diagonal(cross, 0.0)
    return make_gains(rng.uniform(0.1, 2.0, C), rng.uniform(0.1, 2.0, D),
                      rng.uniform(0.1, 2.0, D), rng.uniform(0.1, 2.0, (D, C)),
                      cross)


def test_sinr_zero_interference():
    assert sinr(4e-9, 0.0, 1e-9) == pytest.approx(4.0)


def test_sinr_equal_terms():
    assert sinr(1e-12, 1e-12, 1e-12) == pytest.approx(0.5)


def test_sinr_hand_arithmetic():
    assert sinr(2e-13, 3e-13, 1e-13) == pytest.approx(0.5, rel=1e-12)


def test_sinr_rejects_nonpositive_noise():
    with pytest.raises(ValueError):
        sinr(1.0, 0.0, 0.0)


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (1.0, 1.0), (3.0, 2.0)])
def test_shannon_rate_identities(x, expected):
    assert shannon_rate(x) == pytest.approx(expected, rel=1e-12)


def test_standalone_rate_identities():
    powers = simple_powers(1)
    g = make_gains([N0 / powers.p_bs], [1.0], [1.0], [[1.0]], [[0.0]])
    assert standalone_rate(0, g, powers) == pytest.approx(1.0, rel=1e-12)
    g3 = make_gains([3 * N0 / powers.p_bs], [1.0], [1.0], [[1.0]], [[0.0]])
    assert standalone_rate(0, g3, powers) == pytest.approx(2.0, rel=1e-12)


def test_cellular_package_rate_no_interference_equals_standalone():
    powers = simple_powers(2)
    g = make_gains([0.5], [1.0, 1.0], [1.0, 1.0],
                   [[0.0], [0.0]], [[0.0, 0.1], [0.1, 0.0]])
    pkg = PackageId(index=1, members=(0, 1))
    assert cellular_package_rate(0, pkg, g, powers) == pytest.approx(
        standalone_rate(0, g, powers), rel=1e-12)


def test_cellular_package_rate_hand_value():
    # Signal 4*N0, one interferer contributing N0: log2(1 + 4/2) = log2 3.
    powers = simple_powers(1)
    g = make_gains([4 * N0 / powers.p_bs], [1.0], [1.0],
                   [[N0 / powers.p_d2d[0]]], [[0.0]])
    pkg = PackageId(index=1, members=(0,))
    assert cellular_package_rate(0, pkg, g, powers) == pytest.approx(
        math.log2(3.0), rel=1e-12)


def test_d2d_rate_singleton_ignores_cross_gains():
    powers = simple_powers(2)
    cross = [[0.0, 5.0], [5.0, 0.0]]
    g = make_gains([1.0], [0.1, 0.1], [0.3, 0.3], [[0.1], [0.1]], cross)
    single = d2d_rate_in_package(0, PackageId(index=1, members=(0,)), g, powers)
    no_cross = make_gains([1.0], [0.1, 0.1], [0.3, 0.3], [[0.1], [0.1]],
                          [[0.0, 0.0], [0.0, 0.0]])
    paired = d2d_rate_in_package(0, PackageId(index=3, members=(0, 1)),
                                 no_cross, powers)
    assert single == pytest.approx(paired, rel=1e-12)


def test_d2d_rate_hand_value():
    # Signal 3*N0 against BS interference N0 plus cross interference N0:
    # log2(1 + 3/3) = 1.
    powers = simple_powers(2)
    g = make_gains([1.0], [N0 / powers.p_bs, 0.0],
                   [3 * N0 / powers.p_d2d[0], 1.0],
                   [[0.0], [0.0]],
                   [[0.0, 0.0], [N0 / powers.p_d2d[1], 0.0]])
    rate = d2d_rate_in_package(0, PackageId(index=3, members=(0, 1)), g, powers)
    assert rate == pytest.approx(1.0, rel=1e-12)


def test_d2d_rate_requires_membership():
    powers = simple_powers(2)
    g = random_gains(np.random.default_rng(0), 1, 2)
    with pytest.raises(ValueError):
        d2d_rate_in_package(1, PackageId(index=1, members=(0,)), g, powers)


def test_package_channel_rate_singleton_is_two_terms():
    powers = simple_powers(2)
    g = random_gains(np.random.default_rng(1), 2, 2)
    pkg = PackageId(index=1, members=(0,))
    expected = cellular_package_rate(0, pkg, g, powers) \
        + d2d_rate_in_package(0, pkg, g, powers)
    assert package_channel_rate(0, pkg, g, powers) == pytest.approx(expected)


def test_package_channel_rate_decoupled_links():
    powers = simple_powers(2)
    g = make_gains([2.0], [0.0, 0.0], [0.7, 0.9],
                   [[0.0], [0.0]], [[0.0, 0.0], [0.0, 0.0]])
    pkg = PackageId(index=3, members=(0, 1))
    expected = standalone_rate(0, g, powers)
    for d in range(2):
        expected += math.log2(1.0 + powers.p_d2d[d] * g.g_d2d_self[d] / N0)
    assert package_channel_rate(0, pkg, g, powers) == pytest.approx(
        expected, rel=1e-12)


def test_package_channel_rate_matches_reference_transcription():
    rng = np.random.default_rng(42)
    powers = simple_powers(4)
    g = random_gains(rng, 3, 4)
    for pkg in enumerate_packages(4):
        c = int(rng.integers(0, 3))
        assert package_channel_rate(c, pkg, g, powers) == pytest.approx(
            reference_shared_rate(c, pkg.members, g, powers), rel=1e-12)


def test_valuation_table_matches_scalar_recomputation():
    # Vectorised builder against the per-entry operations, C=2, D=2.
    rng = np.random.default_rng(3)
    cfg = CellConfig()
    sc = place_users(cfg, 2, 2, rng)
    g = build_link_gains(sc, cfg, rng)
    powers = Powers.from_scenario(sc)
    packages = enumerate_packages(2)
    table = build_valuation_table(sc, g, packages)
    for c in range(2):
        assert table.standalone[c] == pytest.approx(
            standalone_rate(c, g, powers), rel=1e-9)
        for k, pkg in enumerate(packages):
            rate = package_channel_rate(c, pkg, g, powers)
            assert table.package_rate[c, k] == pytest.approx(rate, rel=1e-9)
            assert table.values[c, k] == pytest.approx(
                max(rate - standalone_rate(c, g, powers), 0.0), abs=1e-9)


def test_valuation_table_clamps_harmful_packages():
    # Enormous interference into the cellular user forces a zero value.
    rng = np.random.default_rng(8)
    cfg = CellConfig()
    sc = place_users(cfg, 1, 1, rng)
    g = make_gains([1e-9], [1e-3], [1e-9], [[1e3]], [[0.0]])
    table = build_valuation_table(sc, g, enumerate_packages(1))
    assert table.values[0, 0] == 0.0
    assert table.package_rate[0, 0] < table.standalone[0]


def test_valuation_table_pure_gain_when_no_interference_into_cell():
    rng = np.random.default_rng(9)
    cfg = CellConfig()
    sc = place_users(cfg, 2, 2, rng)
    g = random_gains(np.random.default_rng(10), 2, 2)
    g = make_gains(g.g_bs_cell, g.g_bs_d2drx, g.g_d2d_self,
                   np.zeros((2, 2)), g.g_d2d_cross)
    powers = Powers.from_scenario(sc)
    table = build_valuation_table(sc, g, enumerate_packages(2))
    for d in range(2):
        k = table.mask_index[1 << d]
        pkg = table.packages[k]
        expected = d2d_rate_in_package(d, pkg, g, powers)
        assert table.values[0, k] == pytest.approx(expected, rel=1e-9)
        assert table.values[0, k] > 0


def test_restrict_to_singletons():
    rng = np.random.default_rng(12)
    cfg = CellConfig()
    sc = place_users(cfg, 2, 3, rng)
    g = build_link_gains(sc, cfg, rng)
    table = build_valuation_table(sc, g, enumerate_packages(3))
    singles = restrict_to_singletons(table)
    assert singles.num_packages == 3
    for j, pkg in enumerate(singles.packages):
        assert pkg.members == (j,)
        k = table.mask_index[1 << j]
        assert np.array_equal(singles.values[:, j], table.values[:, k])


def test_system_sum_rate_empty_allocation():
    powers = simple_powers(2)
    g = random_gains(np.random.default_rng(2), 3, 2)
    expected = sum(standalone_rate(c, g, powers) for c in range(3))
    assert system_sum_rate({}, g, powers) == pytest.approx(expected, rel=1e-12)


def test_system_sum_rate_hand_instance():
    # C=2, D=2: bidder 0 hosts both pairs, bidder 1 stays alone.
    powers = simple_powers(2)
    g = random_gains(np.random.default_rng(4), 2, 2)
    pkg = PackageId(index=3, members=(0, 1))
    got = system_sum_rate({0: pkg}, g, powers)
    expected = reference_shared_rate(0, (0, 1), g, powers) \
        + math.log2(1.0 + powers.p_bs * g.g_bs_cell[1] / N0)
    assert got == pytest.approx(expected, rel=1e-12)


def test_system_sum_rate_rejects_overlap():
    powers = simple_powers(2)
    g = random_gains(np.random.default_rng(5), 2, 2)
    a = PackageId(index=1, members=(0,))
    b = PackageId(index=3, members=(0, 1))
    with pytest.raises(FeasibilityError):
        system_sum_rate({0: a, 1: b}, g, powers)


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_system_sum_rate_consistency_identity(seed):
    # Rate of an allocation minus the empty allocation equals the summed
    # unclamped per-channel deltas.
    rng = np.random.default_rng(seed)
    C, D = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    g = random_gains(rng, C, D)
    powers = simple_powers(D)
    pairs = list(rng.permutation(D))
    allocation = {}
    c = 0
    while pairs and c < C:
        take = int(rng.integers(0, len(pairs) + 1))
        if take:
            members = tuple(sorted(int(p) for p in pairs[:take]))
            allocation[c] = PackageId(index=1, members=members)
            pairs = pairs[take:]
        c += 1
    lhs = system_sum_rate(allocation, g, powers) - system_sum_rate({}, g, powers)
    rhs = sum(package_channel_rate(c, pkg, g, powers)
              - standalone_rate(c, g, powers)
              for c, pkg in allocation.items())
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_interference_monotonicity_signs():
    # Raising the pair-to-cell gain or the BS-to-receiver gain strictly
    # lowers a singleton package's value; the central finite difference of
    # the unclamped value is negative at random operating points.
    rng = np.random.default_rng(77)
    powers = simple_powers(1)
    for _ in range(10):
        g = random_gains(rng, 1, 1)
        pkg = PackageId(index=1, members=(0,))

        def unclamped(g_dc=None, g_bd=None):
            gg = make_gains(g.g_bs_cell,
                            [g_bd if g_bd is not None else g.g_bs_d2drx[0]],
                            g.g_d2d_self,
                            [[g_dc if g_dc is not None else g.g_d2d_cell[0, 0]]],
                            g.g_d2d_cross)
            return package_channel_rate(0, pkg, gg, powers) \
                - standalone_rate(0, gg, powers)

        base_dc = float(g.g_d2d_cell[0, 0])
        base_bd = float(g.g_bs_d2drx[0])
        eps = 1e-6
        assert unclamped(g_dc=base_dc * (1 + eps)) < unclamped()
        assert unclamped(g_bd=base_bd * (1 + eps)) < unclamped()
        d_dc = (unclamped(g_dc=base_dc + eps) - unclamped(g_dc=base_dc - eps)) / (2 * eps)
        d_bd = (unclamped(g_bd=base_bd + eps) - unclamped(g_bd=base_bd - eps)) / (2 * eps)
        assert d_dc < 0
        assert d_bd < 0


def test_package_growth_never_helps_existing_links():
    # Adding a member can only add interference: the cellular rate and the
    # incumbent members' rates are non-increasing.
    rng = np.random.default_rng(88)
    powers = simple_powers(4)
    for _ in range(20):
        g = random_gains(rng, 2, 4)
        members = tuple(sorted(rng.choice(4, size=2, replace=False).tolist()))
        extra = next(d for d in range(4) if d not in members)
        small = PackageId(index=1, members=members)
        big = PackageId(index=2, members=tuple(sorted(members + (extra,))))
        c = int(rng.integers(0, 2))
        assert cellular_package_rate(c, big, g, powers) \
            <= cellular_package_rate(c, small, g, powers) + 1e-12
        for d in members:
            assert d2d_rate_in_package(d, big, g, powers) \
                <= d2d_rate_in_package(d, small, g, powers) + 1e-12
