"""Command-line entry point: load a config, run a sweep, write CSVs.

The config file is flat ``key = value`` text with ``#`` comments; unset
keys take the built-in defaults.  Outputs are a results CSV (one row per
sweep point and algorithm), an optional price-trace CSV (one row per
price change of the full auction in every drop), and a plain-text summary.
All numbers use '.' as the decimal separator regardless of locale, and a
fixed master seed reproduces the files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path

from .auction import AuctionConfig, InvariantViolation
from .experiments import (ALGORITHMS, DropConfig, MonteCarloResult, SweepSpec,
                          monte_carlo)
from .geometry import CellConfig, PlacementError, dbm_to_watts, noise_power

RESULTS_COLUMNS = ("sweep_variable", "value", "algorithm", "mean_sum_rate",
                   "std_sum_rate", "mean_eta", "mean_E", "mean_rounds",
                   "drops", "master_seed")
TRACE_COLUMNS = ("drop_seed", "event_index", "round_t", "item", "price", "phase")


class ConfigError(ValueError):
    """Bad configuration file or override; the message names the key."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; defaults follow the standard single-cell
    downlink setup (500 m cell, -174 dBm/Hz noise over 15 kHz, 9 dB device
    noise figure, 46 dBm BS / 23 dBm devices, 5 m D2D range)."""

    cell_radius_m: float = 500.0
    max_d2d_distance_m: float = 5.0
    path_loss_exponent_cellular: float = 3.67
    path_loss_exponent_d2d: float = 2.0
    shadowing_sigma_cellular_db: float = 8.0
    shadowing_sigma_d2d_db: float = 4.0
    bs_antenna_gain_db: float = 14.0
    ue_antenna_gain_db: float = 0.0
    bs_power_dbm: float = 46.0
    device_power_dbm: float = 23.0
    noise_density_dbm_hz: float = -174.0
    subcarrier_bandwidth_hz: float = 15000.0
    noise_figure_db: float = 9.0
    delta: float = 0.1
    fine_tune_divisor: int = 10
    max_fine_tune_rounds: int = 100
    initial_price_policy: str = "above_max_singleton"
    initial_price_value: float = 0.0
    sweep_variable: str = "num_d2d_pairs"
    sweep_values: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    num_resource_units: int = 8
    num_d2d_pairs: int = 4
    drops_per_point: int = 200
    master_seed: int = 1
    max_package_size: int = 0          # 0 means uncapped
    allow_large_exhaustive: bool = False


_RANGE_CHECKS = {
    "cell_radius_m": lambda v: v > 0,
    "max_d2d_distance_m": lambda v: v > 0,
    "path_loss_exponent_cellular": lambda v: v >= 2,
    "path_loss_exponent_d2d": lambda v: v >= 2,
    "shadowing_sigma_cellular_db": lambda v: v >= 0,
    "shadowing_sigma_d2d_db": lambda v: v >= 0,
    "subcarrier_bandwidth_hz": lambda v: v > 0,
    "delta": lambda v: v > 0,
    "fine_tune_divisor": lambda v: v >= 1,
    "max_fine_tune_rounds": lambda v: v >= 1,
    "initial_price_policy": lambda v: v in ("above_max_singleton", "fixed"),
    "sweep_variable": lambda v: v in ("num_d2d_pairs", "num_resource_units"),
    "num_resource_units": lambda v: v >= 1,
    "num_d2d_pairs": lambda v: v >= 1,
    "drops_per_point": lambda v: v >= 1,
    "master_seed": lambda v: v >= 0,
    "max_package_size": lambda v: v >= 0,
}


def _parse_values_list(text: str, key: str) -> tuple[int, ...]:
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"out-of-range value for {key}: {text!r}")
    return values


def _coerce(key: str, text: str, template: ExperimentConfig):
    current = getattr(template, key)
    try:
        if key == "sweep_values":
            return _parse_values_list(text, key)
        if isinstance(current, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def parse_config(text: str) -> ExperimentConfig:
    template = ExperimentConfig()
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key: {key}")
        overrides[key] = _coerce(key, value, template)
    config = dataclasses.replace(template, **overrides)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    for key, check in _RANGE_CHECKS.items():
        if not check(getattr(config, key)):
            raise ConfigError(f"out-of-range value for {key}: "
                              f"{getattr(config, key)!r}")
    if config.max_d2d_distance_m > config.cell_radius_m:
        raise ConfigError("out-of-range value for max_d2d_distance_m: "
                          "exceeds cell_radius_m")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(config, f.name)
        if f.name == "sweep_values":
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def build_sweep(config: ExperimentConfig) -> SweepSpec:
    """Translate the flat config into simulator objects; the only dBm to
    watt conversions happen here."""
    cell = CellConfig(
        cell_radius=config.cell_radius_m,
        max_d2d_distance=config.max_d2d_distance_m,
        path_loss_exponent_cellular=config.path_loss_exponent_cellular,
        path_loss_exponent_d2d=config.path_loss_exponent_d2d,
        shadowing_sigma_cellular_db=config.shadowing_sigma_cellular_db,
        shadowing_sigma_d2d_db=config.shadowing_sigma_d2d_db,
        bs_antenna_gain_db=config.bs_antenna_gain_db,
        ue_antenna_gain_db=config.ue_antenna_gain_db,
    )
    policy: str | float = config.initial_price_policy
    if policy == "fixed":
        policy = config.initial_price_value
    auction = AuctionConfig(
        delta=config.delta,
        fine_tune_divisor=config.fine_tune_divisor,
        max_fine_tune_rounds=config.max_fine_tune_rounds,
        initial_price_policy=policy,
    )
    base = DropConfig(
        cell=cell,
        auction=auction,
        p_bs_watts=dbm_to_watts(config.bs_power_dbm),
        p_d2d_watts=dbm_to_watts(config.device_power_dbm),
        noise_watts=noise_power(config.noise_density_dbm_hz,
                                config.subcarrier_bandwidth_hz,
                                config.noise_figure_db),
        max_package_size=config.max_package_size or None,
        allow_large_exhaustive=config.allow_large_exhaustive,
    )
    return SweepSpec(variable=config.sweep_variable, values=config.sweep_values,
                     drops_per_point=config.drops_per_point,
                     num_cellular=config.num_resource_units,
                     num_d2d=config.num_d2d_pairs, base=base)


def _fmt(x: float) -> str:
    return format(x, ".12g")


def write_results_csv(path: Path, result: MonteCarloResult,
                      master_seed: int) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for row in result.summaries:
            writer.writerow([row.variable, row.value, row.algorithm,
                             _fmt(row.mean_sum_rate), _fmt(row.std_sum_rate),
                             _fmt(row.mean_eta), _fmt(row.mean_efficiency),
                             _fmt(row.mean_rounds), row.drops, master_seed])


def write_trace_csv(path: Path, result: MonteCarloResult) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for _value, drop in result.drops:
            for ev in drop.price_history:
                writer.writerow([drop.seed, ev.event_index, ev.t, ev.item,
                                 _fmt(ev.price), ev.phase])


def format_summary(config: ExperimentConfig, result: MonteCarloResult) -> str:
    bw = config.subcarrier_bandwidth_hz
    lines = [
        f"sweep over {config.sweep_variable}, "
        f"{config.drops_per_point} drops per point, "
        f"master seed {config.master_seed}",
        "",
        f"{'point':>6} {'algorithm':<13} {'rate b/s/Hz':>12} {'rate kbit/s':>12} "
        f"{'eta':>7} {'E':>7} {'rounds':>7}",
    ]
    for row in result.summaries:
        lines.append(
            f"{row.value:>6} {row.algorithm:<13} {row.mean_sum_rate:>12.3f} "
            f"{row.mean_sum_rate * bw / 1e3:>12.1f} {row.mean_eta:>7.3f} "
            f"{row.mean_efficiency:>7.3f} {row.mean_rounds:>7.1f}")
    lines.append("")
    lines.append("all per-drop invariants held")
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, out_dir: str | Path,
                   trace: bool = False) -> int:
    """Run the configured sweep and write results; returns the exit code
    (non-zero when any component or invariant failed)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        spec = build_sweep(config)
        result = monte_carlo(spec, master_seed=config.master_seed)
    except (InvariantViolation, PlacementError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_results_csv(out / "results.csv", result, config.master_seed)
    if trace:
        write_trace_csv(out / "price_trace.csv", result)
    summary = format_summary(config, result)
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="d2d-auction",
        description="Spectrum-sharing auction simulator for D2D underlay cells")
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", type=Path, default=Path("results"),
                        help="output directory (default: ./results)")
    parser.add_argument("--trace", action="store_true",
                        help="also write the per-drop price trace CSV")
    parser.add_argument("--drops", type=int, help="override drops per point")
    parser.add_argument("--sweep", help="override sweep, e.g. num_d2d_pairs=2..8")
    parser.add_argument("--max-package-size", type=int,
                        help="cap package sizes (0 = uncapped)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        overrides = {}
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.drops is not None:
            overrides["drops_per_point"] = args.drops
        if args.max_package_size is not None:
            overrides["max_package_size"] = args.max_package_size
        if args.sweep is not None:
            if "=" not in args.sweep:
                raise ConfigError(f"bad value for sweep: {args.sweep!r}")
            var, rng = args.sweep.split("=", 1)
            overrides["sweep_variable"] = var.strip()
            overrides["sweep_values"] = _parse_values_list(rng, "sweep")
        config = dataclasses.replace(config, **overrides)
        validate_config(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(config, args.out, trace=args.trace)


if __name__ == "__main__":
    raise SystemExit(main())
