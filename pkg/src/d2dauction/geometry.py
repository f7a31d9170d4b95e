"""User placement and link power gains for one simulation drop.

A drop is a single cell: the base station sits at the origin, cellular
receivers and D2D transmitters fall uniformly over the cell disc, and each
D2D receiver falls uniformly in a small disc around its transmitter.  All
internal powers are watts and all gains are linear; dB appears only in
configuration values (shadowing sigmas, antenna gains, noise figures).

The propagation model is log-distance path loss normalised so that the gain
at the reference distance of 1 m is 1, times lognormal shadowing and a
Rayleigh (exponential-power) fading draw:

    gain = d^(-alpha) * 10^((shadow_db + antenna_db) / 10) * |h0|^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

D_REF_M = 1.0  # distances below this are clamped before applying path loss
_MAX_REDRAWS = 1000


class PlacementError(RuntimeError):
    """Raised when a D2D receiver cannot be placed inside the cell."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def noise_power(density_dbm_per_hz: float, bandwidth_hz: float,
                noise_figure_db: float = 0.0) -> float:
    """Thermal noise power in watts over the given bandwidth.

    N = density + 10*log10(B) + NF in dBm, converted to watts.
    """
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth_hz must be positive")
    dbm = density_dbm_per_hz + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return dbm_to_watts(dbm)


def path_gain(distance: float, exponent: float, shadow_db: float = 0.0,
              fading_power: float = 1.0, antenna_gain_db: float = 0.0) -> float:
    """Linear power gain of one link.

    Distances below ``D_REF_M`` are clamped so co-located users cannot
    produce unbounded gains; at exactly 1 m with no shadowing, fading or
    antenna gain the result is 1 (received power equals transmit power).
    """
    if fading_power < 0:
        raise ValueError("fading_power must be non-negative")
    d = max(distance, D_REF_M)
    return d ** (-exponent) * db_to_linear(shadow_db + antenna_gain_db) * fading_power


def sample_rayleigh_power(rng: np.random.Generator) -> float:
    """Squared magnitude of a unit-power complex Gaussian channel coefficient.

    Equivalent to an exponential variate with mean 1.
    """
    re = rng.normal(0.0, math.sqrt(0.5))
    im = rng.normal(0.0, math.sqrt(0.5))
    return re * re + im * im


def sample_shadowing_db(rng: np.random.Generator, sigma_db: float) -> float:
    """Lognormal shadowing term in dB (zero-mean Gaussian)."""
    if sigma_db <= 0:
        return 0.0
    return rng.normal(0.0, sigma_db)


# Table-style defaults: 46 dBm base station, 23 dBm devices, -174 dBm/Hz
# noise density over one 15 kHz sub-carrier with a 9 dB device noise figure.
DEFAULT_BS_POWER_W = dbm_to_watts(46.0)
DEFAULT_DEVICE_POWER_W = dbm_to_watts(23.0)
DEFAULT_NOISE_W = noise_power(-174.0, 15_000.0, 9.0)


@dataclass(frozen=True)
class CellConfig:
    """Cell geometry and channel-model knobs.

    The default exponents and sigmas approximate an urban-microcell
    environment for links with a cellular endpoint and a short-range
    near-line-of-sight environment for device-to-device links.
    """

    cell_radius: float = 500.0
    max_d2d_distance: float = 5.0
    path_loss_exponent_cellular: float = 3.67
    path_loss_exponent_d2d: float = 2.0
    shadowing_sigma_cellular_db: float = 8.0
    shadowing_sigma_d2d_db: float = 4.0
    bs_antenna_gain_db: float = 14.0
    ue_antenna_gain_db: float = 0.0

    def __post_init__(self) -> None:
        if self.cell_radius <= 0:
            raise ValueError("cell_radius must be positive")
        if not 0 < self.max_d2d_distance <= self.cell_radius:
            raise ValueError("max_d2d_distance must be in (0, cell_radius]")
        if self.path_loss_exponent_cellular < 2 or self.path_loss_exponent_d2d < 2:
            raise ValueError("path-loss exponents must be >= 2")
        if self.shadowing_sigma_cellular_db < 0 or self.shadowing_sigma_d2d_db < 0:
            raise ValueError("shadowing sigmas must be >= 0")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Positions and radio powers of one drop. Positions are (x, y) metres."""

    bs_position: np.ndarray        # (2,), always the origin
    cellular_positions: np.ndarray  # (C, 2)
    d2d_tx_positions: np.ndarray   # (D, 2)
    d2d_rx_positions: np.ndarray   # (D, 2)
    p_bs: float                    # watts
    p_d2d: np.ndarray              # (D,) watts per pair
    noise_power: float             # watts

    @property
    def num_cellular(self) -> int:
        return self.cellular_positions.shape[0]

    @property
    def num_d2d(self) -> int:
        return self.d2d_tx_positions.shape[0]


@dataclass(frozen=True, eq=False)
class LinkGains:
    """Every linear power gain the rate model needs.

    ``g_d2d_cross[i, j]`` is the gain from D2D transmitter i to D2D
    receiver j; the diagonal is unused and stored as zero.
    """

    g_bs_cell: np.ndarray    # (C,) base station -> cellular receiver
    g_bs_d2drx: np.ndarray   # (D,) base station -> D2D receiver
    g_d2d_self: np.ndarray   # (D,) D2D transmitter -> own receiver
    g_d2d_cell: np.ndarray   # (D, C) D2D transmitter -> cellular receiver
    g_d2d_cross: np.ndarray  # (D, D) D2D transmitter -> other D2D receiver

    @property
    def num_cellular(self) -> int:
        return self.g_bs_cell.shape[0]

    @property
    def num_d2d(self) -> int:
        return self.g_bs_d2drx.shape[0]


def _uniform_disc_point(rng: np.random.Generator, radius: float) -> np.ndarray:
    # Area-uniform: radius grows as sqrt(u), not u.
    r = radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([r * math.cos(theta), r * math.sin(theta)])


def place_users(config: CellConfig, num_cellular: int, num_d2d: int,
                rng: np.random.Generator, *,
                p_bs: float = DEFAULT_BS_POWER_W,
                p_d2d: float | np.ndarray = DEFAULT_DEVICE_POWER_W,
                noise: float = DEFAULT_NOISE_W) -> Scenario:
    """Draw one drop's user positions.

    Cellular receivers and D2D transmitters are area-uniform over the cell
    disc.  Each D2D receiver is area-uniform over the disc of radius
    ``max_d2d_distance`` around its transmitter, re-drawn until it lands
    inside the cell.  Deterministic for a given rng state.
    """
    if num_cellular < 1 or num_d2d < 1:
        raise ValueError("need at least one cellular user and one D2D pair")
    if p_bs <= 0 or noise <= 0:
        raise ValueError("powers must be positive")
    pair_powers = np.broadcast_to(np.asarray(p_d2d, dtype=float), (num_d2d,)).copy()
    if np.any(pair_powers <= 0):
        raise ValueError("powers must be positive")

    cell_pos = np.array([_uniform_disc_point(rng, config.cell_radius)
                         for _ in range(num_cellular)])
    tx_pos = np.array([_uniform_disc_point(rng, config.cell_radius)
                       for _ in range(num_d2d)])
    rx_pos = np.empty_like(tx_pos)
    for d in range(num_d2d):
        for attempt in range(_MAX_REDRAWS):
            cand = tx_pos[d] + _uniform_disc_point(rng, config.max_d2d_distance)
            if np.linalg.norm(cand) <= config.cell_radius:
                rx_pos[d] = cand
                break
        else:
            raise PlacementError(
                f"could not place D2D receiver {d} inside the cell after "
                f"{_MAX_REDRAWS} draws; check cell geometry")

    return Scenario(
        bs_position=np.zeros(2),
        cellular_positions=cell_pos,
        d2d_tx_positions=tx_pos,
        d2d_rx_positions=rx_pos,
        p_bs=float(p_bs),
        p_d2d=pair_powers,
        noise_power=float(noise),
    )


def build_link_gains(scenario: Scenario, config: CellConfig,
                     rng: np.random.Generator, *,
                     include_fading: bool = True,
                     include_shadowing: bool = True) -> LinkGains:
    """Sample fresh shadowing and fading for every link of the drop.

    Links with a cellular endpoint (base station or cellular receiver) use
    the cellular exponent and sigma; device-to-device links use the D2D
    ones.  Antenna gain is the sum of the two endpoint gains, so only
    base-station links pick up the BS antenna gain.

    Sampling order is fixed (bs->cell, bs->d2d rx, d2d self, d2d->cell,
    d2d cross, shadowing before fading per link) so a seeded rng gives
    bit-identical gains.
    """
    cfg = config
    bs_ant = cfg.bs_antenna_gain_db + cfg.ue_antenna_gain_db
    dev_ant = 2.0 * cfg.ue_antenna_gain_db

    def one(distance: float, exponent: float, sigma: float, ant: float) -> float:
        shadow = sample_shadowing_db(rng, sigma) if include_shadowing else 0.0
        fading = sample_rayleigh_power(rng) if include_fading else 1.0
        return path_gain(distance, exponent, shadow, fading, ant)

    def cellular_link(distance: float, ant: float) -> float:
        return one(distance, cfg.path_loss_exponent_cellular,
                   cfg.shadowing_sigma_cellular_db, ant)

    def d2d_link(distance: float) -> float:
        return one(distance, cfg.path_loss_exponent_d2d,
                   cfg.shadowing_sigma_d2d_db, dev_ant)

    C, D = scenario.num_cellular, scenario.num_d2d
    bs = scenario.bs_position
    g_bs_cell = np.array([
        cellular_link(np.linalg.norm(scenario.cellular_positions[c] - bs), bs_ant)
        for c in range(C)])
    g_bs_d2drx = np.array([
        cellular_link(np.linalg.norm(scenario.d2d_rx_positions[d] - bs), bs_ant)
        for d in range(D)])
    g_d2d_self = np.array([
        d2d_link(np.linalg.norm(scenario.d2d_rx_positions[d]
                                - scenario.d2d_tx_positions[d]))
        for d in range(D)])
    # Interference into a cellular receiver travels device-to-device but the
    # victim is a cellular endpoint, so it uses the cellular exponent/sigma.
    g_d2d_cell = np.array([
        [cellular_link(np.linalg.norm(scenario.cellular_positions[c]
                                      - scenario.d2d_tx_positions[d]), dev_ant)
         for c in range(C)]
        for d in range(D)])
    g_d2d_cross = np.zeros((D, D))
    for d_tx in range(D):
        for d_rx in range(D):
            if d_tx == d_rx:
                continue
            g_d2d_cross[d_tx, d_rx] = d2d_link(
                np.linalg.norm(scenario.d2d_rx_positions[d_rx]
                               - scenario.d2d_tx_positions[d_tx]))

    return LinkGains(g_bs_cell=g_bs_cell, g_bs_d2drx=g_bs_d2drx,
                     g_d2d_self=g_d2d_self, g_d2d_cell=g_d2d_cell,
                     g_d2d_cross=g_d2d_cross)
