"""Parameter sweeps and derived studies over the charging network.

Arrival-rate sweeps, critical-rate detection by the max-jump rule, model-gap
curves, and the (total rate, arrival split) heat map.

Lot numbering. Experiment inputs and outputs are indexed by *parking lot*,
with lot 1 the station farthest from the root node (the one with the
smallest power budget). Electrical station coordinates in the powerflow and
allocator layers run the other way, from the root outward; this module maps
between the two. With this convention, routing a larger arrival fraction to
lot 1 loads the weak end of the feeder, which is what drives the asymmetry
of the heat map and the monotone decrease of the critical rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .markov import (
    ArrivalSpec,
    SimulationConfig,
    exact_metrics,
    simulate,
    stationary_distribution,
)
from .powerflow import Model, NetworkConfig

__all__ = [
    "SweepRow",
    "HeatmapRow",
    "CriticalRateEstimate",
    "lot_arrival_spec",
    "run_sweep",
    "estimate_critical_rate",
    "relative_difference_curve",
    "run_heatmap",
    "critical_rate_curve",
]

#: exact stationary analysis is preferred up to this many states
AUTO_EXACT_LIMIT = 200_000

#: two max-jump candidates closer than this (relative) count as a tie
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class SweepRow:
    """One (model, rate point, lot) cell of a sweep, in CSV column order."""

    model: str
    method: str
    lot: int
    lambda_lot: float
    total_rate: float
    fraction_1: float
    mean_number: float
    mean_number_ci: float
    mean_time: float
    mean_time_ci: float
    blocking: float
    seed: int | None
    horizon: float | None
    burn_in: float | None


@dataclass(frozen=True)
class HeatmapRow:
    model: str
    total_rate: float
    fraction_1: float
    total_mean_number: float
    ci: float


@dataclass(frozen=True)
class CriticalRateEstimate:
    """Max-jump estimate of the per-lot critical arrival rate.

    ``rate`` is the midpoint of the grid pair with the largest jump in total
    mean number; ``lower``/``upper`` bracket that pair. When several jumps
    tie within tolerance there is no clear explosion: ``explosive`` is False,
    the last tied pair is reported, and all tied midpoints are listed in
    ``candidates``.
    """

    model: str
    fraction_1: float
    rate: float
    lower: float
    upper: float
    grid_step: float
    explosive: bool
    candidates: tuple


def lot_arrival_spec(total_rate, fractions, cfg: NetworkConfig) -> ArrivalSpec:
    """Arrival rates in station order from lot-indexed fractions.

    ``fractions[i]`` is the share of the total rate arriving at parking lot
    i+1; lot 1 sits at the far end of the feeder, so the vector is reversed
    into station order.
    """
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (cfg.n_stations,):
        raise ValueError(f"need {cfg.n_stations} fractions, got {fractions.shape}")
    return ArrivalSpec.from_split(total_rate, fractions[::-1])


def _lot_order(values):
    """Station-ordered array -> lot-ordered (lot 1 = far station)."""
    return np.asarray(values)[::-1]


def _evaluate_point(rate, fractions, cfg, sim, method):
    n = cfg.n_stations
    total = n * rate
    arrivals = lot_arrival_spec(total, fractions, cfg)
    if method == "auto":
        method = "exact" if (cfg.capacity + 1) ** n <= AUTO_EXACT_LIMIT else "sim"
    if method == "exact":
        res = exact_metrics(stationary_distribution(arrivals, cfg), arrivals, cfg)
    elif method == "sim":
        res = simulate(arrivals, cfg, sim)
    else:
        raise ValueError(f"unknown method {method!r}")
    return res, method, total


def run_sweep(
    rate_grid,
    fractions,
    cfg: NetworkConfig,
    sim: SimulationConfig | None = None,
    method: str = "auto",
) -> list[SweepRow]:
    """Per-lot performance at each rate point of an increasing grid.

    ``rate_grid`` holds per-lot average arrival rates: a grid value g maps to
    total rate N*g split over the lots by ``fractions``. Points that fail
    downstream are kept as rows of NaNs so the sweep continues.
    """
    rate_grid = [float(g) for g in rate_grid]
    if not rate_grid:
        raise ValueError("rate grid must be nonempty")
    if any(b <= a for a, b in zip(rate_grid, rate_grid[1:])):
        raise ValueError("rate grid must be strictly increasing")
    if method not in ("auto", "exact", "sim"):
        raise ValueError(f"unknown method {method!r}")
    sim = sim or SimulationConfig()
    fractions = np.asarray(fractions, dtype=float)
    n = cfg.n_stations
    rows = []
    for rate in rate_grid:
        try:
            res, used, total = _evaluate_point(rate, fractions, cfg, sim, method)
            mean_no = _lot_order(res.mean_number)
            mean_no_ci = _lot_order(res.mean_number_ci)
            mean_t = _lot_order(res.mean_charging_time)
            mean_t_ci = _lot_order(res.mean_charging_time_ci)
            blocking = _lot_order(res.blocking_fraction)
            for lot in range(1, n + 1):
                rows.append(
                    SweepRow(
                        model=cfg.model.value,
                        method=used,
                        lot=lot,
                        lambda_lot=total * fractions[lot - 1],
                        total_rate=total,
                        fraction_1=float(fractions[0]),
                        mean_number=float(mean_no[lot - 1]),
                        mean_number_ci=float(mean_no_ci[lot - 1]),
                        mean_time=float(mean_t[lot - 1]),
                        mean_time_ci=float(mean_t_ci[lot - 1]),
                        blocking=float(blocking[lot - 1]),
                        seed=res.seed,
                        horizon=res.horizon,
                        burn_in=res.burn_in,
                    )
                )
        except Exception:
            for lot in range(1, n + 1):
                rows.append(
                    SweepRow(
                        model=cfg.model.value,
                        method=method,
                        lot=lot,
                        lambda_lot=n * rate * fractions[lot - 1],
                        total_rate=n * rate,
                        fraction_1=float(fractions[0]),
                        mean_number=math.nan,
                        mean_number_ci=math.nan,
                        mean_time=math.nan,
                        mean_time_ci=math.nan,
                        blocking=math.nan,
                        seed=None,
                        horizon=None,
                        burn_in=None,
                    )
                )
    return rows


def _total_mean_by_rate(rows):
    """Sorted (per-lot rate, total mean number) pairs for one model's rows."""
    n_lots = max(r.lot for r in rows)
    by_rate: dict = {}
    for r in rows:
        key = round(r.total_rate / n_lots, 12)
        by_rate.setdefault(key, 0.0)
        by_rate[key] += r.mean_number
    return sorted(by_rate.items())


def estimate_critical_rate(table) -> dict:
    """Max-jump critical-rate estimate for each model present in a sweep table.

    Scans the total mean number of EVs over the rate grid and reports the
    midpoint of the consecutive pair with the largest absolute jump.
    """
    out = {}
    for model in sorted({r.model for r in table}):
        rows = [r for r in table if r.model == model]
        points = _total_mean_by_rate(rows)
        if len(points) < 3:
            raise ValueError(f"need at least 3 rate points for model {model}")
        rates = np.array([p[0] for p in points])
        means = np.array([p[1] for p in points])
        jumps = np.abs(np.diff(means))
        top = jumps.max()
        tied = np.flatnonzero(jumps >= top * (1.0 - TIE_RTOL))
        i = int(tied[-1])
        candidates = tuple(
            float(0.5 * (rates[t] + rates[t + 1])) for t in tied
        )
        frac = rows[0].fraction_1
        out[model] = CriticalRateEstimate(
            model=model,
            fraction_1=frac,
            rate=float(0.5 * (rates[i] + rates[i + 1])),
            lower=float(rates[i]),
            upper=float(rates[i + 1]),
            grid_step=float(rates[i + 1] - rates[i]),
            explosive=len(tied) == 1,
            candidates=candidates,
        )
    return out


def relative_difference_curve(table_d, table_ld):
    """Percent gap in total mean number, lossy minus linearized, per rate point.

    Both tables must cover the same rate grid. Points where the lossy total
    is zero get a NaN marker.
    """
    pts_d = _total_mean_by_rate(list(table_d))
    pts_ld = _total_mean_by_rate(list(table_ld))
    rates_d = [p[0] for p in pts_d]
    rates_ld = [p[0] for p in pts_ld]
    if rates_d != rates_ld:
        raise ValueError("rate grids differ between the two tables")
    curve = []
    for (rate, m_d), (_, m_ld) in zip(pts_d, pts_ld):
        if m_d == 0:
            curve.append((rate, math.nan))
        else:
            curve.append((rate, 100.0 * (m_d - m_ld) / m_d))
    return curve


def run_heatmap(
    total_rates,
    fractions,
    cfg: NetworkConfig,
    sim: SimulationConfig | None = None,
    method: str = "auto",
) -> list[HeatmapRow]:
    """Total mean number of EVs over the (total rate, fraction-to-lot-1) grid.

    Two-station networks only: each fraction f sends f of the total rate to
    parking lot 1 (far station) and 1-f to lot 2. Failed cells are NaN rows.
    """
    if cfg.n_stations != 2:
        raise ValueError("heat maps are defined for two-station networks")
    if method not in ("auto", "exact", "sim"):
        raise ValueError(f"unknown method {method!r}")
    sim = sim or SimulationConfig()
    rows = []
    for total in total_rates:
        for f in fractions:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"fraction {f} outside [0, 1]")
            try:
                res, _, _ = _evaluate_point(
                    total / 2.0, [f, 1.0 - f], cfg, sim, method
                )
                total_mean = float(res.mean_number.sum())
                ci = float(np.sqrt(np.nansum(res.mean_number_ci**2)))
            except Exception:
                total_mean, ci = math.nan, math.nan
            rows.append(
                HeatmapRow(
                    model=cfg.model.value,
                    total_rate=float(total),
                    fraction_1=float(f),
                    total_mean_number=total_mean,
                    ci=ci,
                )
            )
    return rows


def critical_rate_curve(
    fraction_grid,
    rate_grid,
    cfg: NetworkConfig,
    sim: SimulationConfig | None = None,
    method: str = "auto",
) -> list[CriticalRateEstimate]:
    """Critical-rate estimate at each arrival split, two-station networks."""
    if cfg.n_stations != 2:
        raise ValueError("the fraction scan is defined for two-station networks")
    estimates = []
    for f in fraction_grid:
        table = run_sweep(rate_grid, [f, 1.0 - f], cfg, sim, method)
        estimates.append(estimate_critical_rate(table)[cfg.model.value])
    return estimates
