"""Command-line entry point, configuration loading, and CSV persistence.

Subcommands: allocate, simulate, stationary, sweep, critical, heatmap. Each
file-producing run writes a CSV in one of the fixed schemas plus a plain
key-value manifest recording the resolved configuration. Flags override a
``key = value`` config file, which overrides the defaults (N=2, r=0.1,
K=100, delta=0.05); the GRIDSHARE_SEED environment variable is the seed
fallback.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .allocator import allocate
from .experiments import critical_rate_curve, run_heatmap, run_sweep
from .markov import SimulationConfig
from .powerflow import NetworkConfig

__all__ = ["main", "run_command", "write_results_csv"]

SWEEP_COLUMNS = (
    "model", "method", "lot", "lambda_lot", "total_rate", "fraction_1",
    "mean_number", "mean_number_ci", "mean_time", "mean_time_ci",
    "blocking", "seed", "horizon", "burn_in",
)
HEATMAP_COLUMNS = ("model", "total_rate", "fraction_1", "total_mean_number", "ci")
CRITICAL_COLUMNS = ("model", "fraction_1", "critical_rate", "grid_step")

#: CSV column name -> dataclass attribute, where the two differ
_ATTR = {"critical_rate": "rate"}

#: sort keys making row order deterministic (lexicographic in grid keys)
_ROW_ORDER = {
    SWEEP_COLUMNS: ("model", "total_rate", "lot"),
    HEATMAP_COLUMNS: ("model", "total_rate", "fraction_1"),
    CRITICAL_COLUMNS: ("model", "fraction_1"),
}

NETWORK_KEYS = ("model", "stations", "resistance", "delta", "capacity")
SIM_KEYS = ("horizon", "burn_in", "seed", "replications", "batches")

DEFAULTS = {
    "model": "distflow",
    "stations": 2,
    "resistance": 0.1,
    "delta": 0.05,
    "capacity": 100,
    "horizon": 2e5,
    "burn_in": 2e4,
    "seed": None,
    "replications": 5,
    "batches": 20,
}

_CASTS = {
    "stations": int,
    "capacity": int,
    "seed": int,
    "replications": int,
    "batches": int,
    "resistance": float,
    "delta": float,
    "horizon": float,
    "burn_in": float,
    "model": str,
}


class CliError(Exception):
    """Validation failure reported as a diagnostic with exit status 1."""


def _fmt(value) -> str:
    """One CSV/stdout cell: 7 significant digits for floats, blank for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        if np.isnan(value):
            return "nan"
        return f"{value:.7g}"
    return str(value)


def write_results_csv(table, path, columns=None):
    """Write dataclass rows as UTF-8 CSV with a fixed header.

    Column order follows the schema of the row type; rows are sorted
    lexicographically in their grid keys so reruns are byte-identical.
    """
    rows = list(table)
    if columns is None:
        if not rows:
            raise ValueError("cannot infer a schema from an empty table")
        columns = tuple(rows[0].__dataclass_fields__)
    columns = tuple(columns)
    for known, keys in _ROW_ORDER.items():
        if columns == known:
            rows.sort(key=lambda r: tuple(getattr(r, _ATTR.get(k, k)) for k in keys))
            break
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow(
                    _fmt(getattr(row, _ATTR.get(c, c))) for c in columns
                )
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}") from exc
    return path


def write_manifest(path, command, settings):
    """Plain key-value manifest recording how to reproduce a run."""
    lines = [
        f"command = {command}",
        f"tool = gridshare {__version__}",
        f"timestamp = {datetime.now(timezone.utc).isoformat()}",
    ]
    for key in sorted(settings):
        lines.append(f"{key} = {_fmt(settings[key])}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}") from exc
    return path


def _manifest_path(out_path):
    root, _ = os.path.splitext(out_path)
    return root + ".manifest.txt"


def read_config_file(path) -> dict:
    """Parse a ``key = value`` config file; '#' starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                key = key.strip()
                if key not in _CASTS:
                    raise CliError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = _CASTS[key](value.strip())
                except ValueError as exc:
                    raise CliError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    return values


def _float_list(text):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _grid(text):
    """A comma list of values, or start:stop:step (stop inclusive)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid must be start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(round((stop - start) / step))
        return [round(start + i * step, 12) for i in range(count + 1)
                if start + i * step <= stop + 1e-12]
    return _float_list(text)


def _add_network_flags(sub, models=("distflow", "linearized")):
    sub.add_argument("--model", choices=list(models))
    sub.add_argument("--stations", type=int)
    sub.add_argument("--resistance", type=float)
    sub.add_argument("--delta", type=float)
    sub.add_argument("--capacity", type=int)
    sub.add_argument("--config", metavar="FILE",
                     help="key = value file; flags take precedence")


def _add_sim_flags(sub):
    sub.add_argument("--horizon", type=float)
    sub.add_argument("--burn-in", dest="burn_in", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--replications", type=int)
    sub.add_argument("--batches", type=int)


def _resolve(args) -> dict:
    """Merge defaults, config file, environment, and flags (in that order)."""
    settings = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        settings.update(read_config_file(config_path))
    env_seed = os.environ.get("GRIDSHARE_SEED")
    if settings["seed"] is None and env_seed is not None:
        try:
            settings["seed"] = int(env_seed)
        except ValueError:
            raise CliError(f"GRIDSHARE_SEED must be an integer, got {env_seed!r}")
    for key in NETWORK_KEYS + SIM_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    if settings["seed"] is None:
        settings["seed"] = 0
    return settings


def _network(settings) -> NetworkConfig:
    try:
        return NetworkConfig(
            n_stations=settings["stations"],
            resistance=settings["resistance"],
            delta=settings["delta"],
            capacity=settings["capacity"],
            model=settings["model"],
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _simconfig(settings) -> SimulationConfig:
    try:
        return SimulationConfig(
            horizon=settings["horizon"],
            burn_in=settings["burn_in"],
            seed=settings["seed"],
            replications=settings["replications"],
            batches=settings["batches"],
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _lot_rates(args, settings) -> list:
    """Per-lot arrival rates from --lambda (single value is replicated)."""
    if args.lam is None:
        raise CliError("--lambda is required")
    rates = args.lam if isinstance(args.lam, list) else [args.lam]
    n = settings["stations"]
    if len(rates) == 1:
        rates = rates * n
    if len(rates) != n:
        raise CliError(f"--lambda needs 1 or {n} values, got {len(rates)}")
    if any(r < 0 for r in rates):
        raise CliError("arrival rates must be nonnegative")
    return rates


def _point_rows(rates, settings, method):
    """Sweep-schema rows for a single arrival-rate point."""
    total = sum(rates)
    fractions = [r / total for r in rates] if total > 0 else [1.0 / len(rates)] * len(rates)
    cfg = _network(settings)
    sim = _simconfig(settings)
    return run_sweep([total / settings["stations"]], fractions, cfg, sim, method)


def _cmd_allocate(args):
    settings = _resolve(args)
    cfg = _network(settings)
    if args.state is None:
        raise CliError("--state is required")
    try:
        state = [int(tok) for tok in args.state.split(",")]
    except ValueError as exc:
        raise CliError(f"bad --state: {exc}")
    try:
        p = allocate(state, cfg)
    except ValueError as exc:
        raise CliError(str(exc))
    print(", ".join(_fmt(float(v)) for v in p))
    return 0


def _run_point_command(args, command, method):
    settings = _resolve(args)
    rates = _lot_rates(args, settings)
    rows = _point_rows(rates, settings, method)
    out = args.out or f"{command}.csv"
    write_results_csv(rows, out, SWEEP_COLUMNS)
    settings["lambda"] = ",".join(_fmt(r) for r in rates)
    settings["method"] = method
    settings["out"] = out
    write_manifest(_manifest_path(out), command, settings)
    print(f"wrote {out}")
    return 0


def _cmd_simulate(args):
    return _run_point_command(args, "simulate", "sim")


def _cmd_stationary(args):
    return _run_point_command(args, "stationary", "exact")


def _models(args):
    if args.model in (None, "both"):
        return ["distflow", "linearized"]
    return [args.model]


def _cmd_sweep(args):
    settings = _resolve(args)
    grid = args.grid or _grid("0.02:0.40:0.005")
    n = settings["stations"]
    fractions = args.fractions or [1.0 / n] * n
    if len(fractions) != n:
        raise CliError(f"--fractions needs {n} values, got {len(fractions)}")
    sim = _simconfig(settings)
    rows = []
    for model in _models(args):
        cfg = _network({**settings, "model": model})
        rows.extend(run_sweep(grid, fractions, cfg, sim, args.method))
    out = args.out or "sweep.csv"
    write_results_csv(rows, out, SWEEP_COLUMNS)
    settings.update(
        model=",".join(_models(args)),
        grid=",".join(_fmt(g) for g in grid),
        fractions=",".join(_fmt(f) for f in fractions),
        method=args.method, out=out,
    )
    write_manifest(_manifest_path(out), "sweep", settings)
    print(f"wrote {out}")
    return 0


def _cmd_critical(args):
    settings = _resolve(args)
    grid = args.grid or _grid("0.02:0.40:0.005")
    fracs = args.fraction_grid or [0.5]
    sim = _simconfig(settings)
    estimates = []
    for model in _models(args):
        cfg = _network({**settings, "model": model, "stations": 2})
        estimates.extend(
            critical_rate_curve(fracs, grid, cfg, sim, args.method)
        )
    out = args.out or "critical.csv"
    write_results_csv(estimates, out, CRITICAL_COLUMNS)
    settings.update(
        model=",".join(_models(args)),
        grid=",".join(_fmt(g) for g in grid),
        fraction_grid=",".join(_fmt(f) for f in fracs),
        method=args.method, out=out,
    )
    write_manifest(_manifest_path(out), "critical", settings)
    print(f"wrote {out}")
    return 0


def _cmd_heatmap(args):
    settings = _resolve(args)
    totals = args.total_rates or _grid("0.1:1.2:0.05")
    fracs = args.fractions or _grid("0.05:0.95:0.05")
    sim = _simconfig(settings)
    rows = []
    for model in _models(args):
        cfg = _network({**settings, "model": model, "stations": 2})
        rows.extend(run_heatmap(totals, fracs, cfg, sim, args.method))
    out = args.out or "heatmap.csv"
    write_results_csv(rows, out, HEATMAP_COLUMNS)
    settings.update(
        model=",".join(_models(args)),
        total_rates=",".join(_fmt(t) for t in totals),
        fractions=",".join(_fmt(f) for f in fracs),
        method=args.method, out=out,
    )
    write_manifest(_manifest_path(out), "heatmap", settings)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshare",
        description="EV charging on a line network under voltage-drop "
                    "constrained proportional-fair power allocation.",
    )
    parser.add_argument("--version", action="version",
                        version=f"gridshare {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("allocate", help="print the allocation for one state")
    _add_network_flags(p)
    p.add_argument("--state", help="comma-separated EV counts, station order")
    p.set_defaults(func=_cmd_allocate)

    for name, func, help_text in [
        ("simulate", _cmd_simulate, "simulate one arrival-rate point"),
        ("stationary", _cmd_stationary, "exact stationary metrics for one point"),
    ]:
        p = subs.add_parser(name, help=help_text)
        _add_network_flags(p)
        _add_sim_flags(p)
        p.add_argument("--lambda", dest="lam", type=_float_list,
                       help="per-lot arrival rates (single value replicated)")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = subs.add_parser("sweep", help="per-lot means over an arrival-rate grid")
    _add_network_flags(p, models=("distflow", "linearized", "both"))
    _add_sim_flags(p)
    p.add_argument("--grid", type=_grid, help="per-lot rates, list or start:stop:step")
    p.add_argument("--fractions", type=_float_list)
    p.add_argument("--method", choices=["auto", "exact", "sim"], default="auto")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("critical", help="max-jump critical-rate estimates")
    _add_network_flags(p, models=("distflow", "linearized", "both"))
    _add_sim_flags(p)
    p.add_argument("--grid", type=_grid)
    p.add_argument("--fraction-grid", dest="fraction_grid", type=_float_list)
    p.add_argument("--method", choices=["auto", "exact", "sim"], default="auto")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_critical)

    p = subs.add_parser("heatmap", help="total mean number over (rate, split)")
    _add_network_flags(p, models=("distflow", "linearized", "both"))
    _add_sim_flags(p)
    p.add_argument("--total-rates", dest="total_rates", type=_grid)
    p.add_argument("--fractions", type=_grid)
    p.add_argument("--method", choices=["auto", "exact", "sim"], default="auto")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_heatmap)
    return parser


def run_command(argv) -> int:
    """Run one CLI invocation; returns the exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # solver and I/O failures become diagnostics
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
