"""Continuous-time Markov chain of the charging network.

State = per-station EV counts. Arrivals are Poisson per station, service
requirements are mean-1 exponential, and each station's aggregate departure
rate equals its proportional-fair power allocation (every EV at a station
receives an equal share). Provides an event-driven simulator with per-EV
sojourn bookkeeping and an exact stationary-distribution solver for state
spaces up to 10^6 states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats

from .allocator import allocate
from .powerflow import NetworkConfig

__all__ = [
    "ArrivalSpec",
    "SimulationConfig",
    "SimulationResult",
    "StationaryDistribution",
    "StateSpaceError",
    "transition_rates",
    "simulate",
    "stationary_distribution",
    "exact_metrics",
]

#: states above this are refused by the exact solver
MAX_STATES = 1_000_000

#: residual contract on the stationary solve
STATIONARY_RESIDUAL_TOL = 1e-10


class StateSpaceError(ValueError):
    """The exact solver was asked for more states than it supports."""


@dataclass(frozen=True)
class ArrivalSpec:
    """Per-station Poisson arrival rates."""

    rates: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(r < 0 for r in rates):
            raise ValueError("arrival rates must be nonnegative")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_split(cls, total_rate, fractions):
        """Build rates from a total rate and per-station fractions summing to 1."""
        fractions = np.asarray(fractions, dtype=float)
        if np.any(fractions < 0):
            raise ValueError("fractions must be nonnegative")
        if abs(fractions.sum() - 1.0) > 1e-12:
            raise ValueError(f"fractions must sum to 1, got {fractions.sum()}")
        if total_rate < 0:
            raise ValueError("total rate must be nonnegative")
        return cls(tuple(float(total_rate) * fractions))

    @property
    def total(self):
        return sum(self.rates)


@dataclass(frozen=True)
class SimulationConfig:
    """Run length and estimator settings for the event-driven simulator."""

    horizon: float = 2e5
    burn_in: float = 2e4
    seed: int = 0
    replications: int = 5
    batches: int = 20

    def __post_init__(self):
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError("need 0 <= burn_in < horizon")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.batches < 2:
            raise ValueError("batches must be >= 2")


@dataclass(frozen=True)
class SimulationResult:
    """Per-station performance estimates with batch-means confidence half-widths.

    ``mean_charging_time`` entries are NaN where no accepted arrivals exist
    (the undefined marker). ``method`` is "sim" for simulation output and
    "exact" for stationary-analysis output (all half-widths zero there).
    """

    mean_number: np.ndarray
    mean_number_ci: np.ndarray
    mean_charging_time: np.ndarray
    mean_charging_time_ci: np.ndarray
    blocking_fraction: np.ndarray
    blocking_fraction_ci: np.ndarray
    arrivals: np.ndarray
    departures: np.ndarray
    blocked: np.ndarray
    method: str
    seed: int | None
    network: NetworkConfig
    arrival_rates: tuple
    horizon: float | None = None
    burn_in: float | None = None


def _check_arrivals(arrivals: ArrivalSpec, cfg: NetworkConfig):
    if len(arrivals.rates) != cfg.n_stations:
        raise ValueError(
            f"need {cfg.n_stations} arrival rates, got {len(arrivals.rates)}"
        )


def transition_rates(x, arrivals: ArrivalSpec, cfg: NetworkConfig):
    """Outgoing transitions of the chain from state ``x``.

    Returns a list of ``(next_state, rate)`` pairs: one arrival per station
    below capacity (rate lambda_j) and one departure per busy station (rate
    equal to the station's allocated power).
    """
    _check_arrivals(arrivals, cfg)
    x = np.asarray(x, dtype=np.int64)
    p = allocate(x, cfg)
    out = []
    for j in range(cfg.n_stations):
        if x[j] < cfg.capacity and arrivals.rates[j] > 0:
            nxt = x.copy()
            nxt[j] += 1
            out.append((tuple(nxt), arrivals.rates[j]))
    for j in range(cfg.n_stations):
        if x[j] > 0:
            nxt = x.copy()
            nxt[j] -= 1
            out.append((tuple(nxt), float(p[j])))
    return out


def _halfwidth(batch_means):
    """95% t-based confidence half-width from a list of batch means."""
    vals = np.asarray(batch_means, dtype=float)
    vals = vals[~np.isnan(vals)]
    n = vals.size
    if n < 2:
        return math.nan
    tcrit = stats.t.ppf(0.975, n - 1)
    return float(tcrit * vals.std(ddof=1) / math.sqrt(n))


def _simulate_one(arrivals, cfg, sim, rng):
    """One replication; returns per-batch tallies."""
    n = cfg.n_stations
    k = cfg.capacity
    lam = np.asarray(arrivals.rates)
    nb = sim.batches
    window = sim.horizon - sim.burn_in
    batch_len = window / nb
    edges = sim.burn_in + batch_len * np.arange(nb + 1)

    x = np.zeros(n, dtype=np.int64)
    arrival_times = [[] for _ in range(n)]
    t = 0.0

    area = np.zeros((nb, n))  # integral of X_j per batch
    sojourn_sum = np.zeros((nb, n))
    sojourn_cnt = np.zeros((nb, n), dtype=np.int64)
    arr_cnt = np.zeros((nb, n), dtype=np.int64)
    blk_cnt = np.zeros((nb, n), dtype=np.int64)

    def batch_of(time):
        b = int((time - sim.burn_in) / batch_len)
        return min(max(b, 0), nb - 1)

    def add_area(t0, t1):
        lo = max(t0, sim.burn_in)
        if t1 <= lo:
            return
        b0, b1 = batch_of(lo), batch_of(t1 - 1e-300)
        for b in range(b0, b1 + 1):
            seg = min(t1, edges[b + 1]) - max(lo, edges[b])
            if seg > 0:
                area[b] += seg * x

    total_arr_rate = lam.sum()
    cum_lam = np.cumsum(lam)
    while True:
        p = allocate(x, cfg)
        dep_rates = np.where(x > 0, p, 0.0)
        total = total_arr_rate + dep_rates.sum()
        if total <= 0:
            add_area(t, sim.horizon)
            break
        t_next = t + rng.exponential(1.0 / total)
        if t_next > sim.horizon:
            add_area(t, sim.horizon)
            break
        add_area(t, t_next)
        t = t_next
        u = rng.random() * total
        if u < total_arr_rate:
            j = int(np.searchsorted(cum_lam, u, side="right"))
            j = min(j, n - 1)
            if t > sim.burn_in:
                arr_cnt[batch_of(t), j] += 1
            if x[j] >= k:
                if t > sim.burn_in:
                    blk_cnt[batch_of(t), j] += 1
            else:
                x[j] += 1
                arrival_times[j].append(t)
        else:
            u -= total_arr_rate
            j = int(np.searchsorted(np.cumsum(dep_rates), u, side="right"))
            j = min(j, n - 1)
            # equal power sharing + memoryless requirements: the departing EV
            # is uniform among those present
            i = int(rng.integers(x[j]))
            t_arr = arrival_times[j][i]
            arrival_times[j][i] = arrival_times[j][-1]
            arrival_times[j].pop()
            x[j] -= 1
            if t > sim.burn_in:
                b = batch_of(t)
                sojourn_sum[b, j] += t - t_arr
                sojourn_cnt[b, j] += 1
    return area, sojourn_sum, sojourn_cnt, arr_cnt, blk_cnt, batch_len


def simulate(
    arrivals: ArrivalSpec, cfg: NetworkConfig, sim: SimulationConfig
) -> SimulationResult:
    """Event-driven simulation of the charging CTMC.

    Blocked arrivals are lost. Statistics are collected over
    ``(burn_in, horizon]``; confidence half-widths come from batch means
    pooled over the independent replications. Output is a pure function of
    ``(arrivals, cfg, sim)``.
    """
    _check_arrivals(arrivals, cfg)
    n = cfg.n_stations
    streams = np.random.SeedSequence(sim.seed).spawn(sim.replications)
    areas, soj_sums, soj_cnts, arrs, blks = [], [], [], [], []
    batch_len = None
    for ss in streams:
        rng = np.random.default_rng(ss)
        a, s, c, ar, bl, batch_len = _simulate_one(arrivals, cfg, sim, rng)
        areas.append(a)
        soj_sums.append(s)
        soj_cnts.append(c)
        arrs.append(ar)
        blks.append(bl)
    area = np.concatenate(areas)  # (reps*batches, n)
    soj_sum = np.concatenate(soj_sums)
    soj_cnt = np.concatenate(soj_cnts)
    arr = np.concatenate(arrs)
    blk = np.concatenate(blks)

    window = sim.horizon - sim.burn_in
    mean_number = area.sum(axis=0) / (sim.replications * window)
    mean_number_ci = np.array([_halfwidth(area[:, j] / batch_len) for j in range(n)])

    dep_total = soj_cnt.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_time = np.where(dep_total > 0, soj_sum.sum(axis=0) / dep_total, np.nan)
        time_batches = np.where(soj_cnt > 0, soj_sum / soj_cnt, np.nan)
    mean_time_ci = np.array([_halfwidth(time_batches[:, j]) for j in range(n)])

    arr_total = arr.sum(axis=0)
    blk_total = blk.sum(axis=0)
    blocking = np.where(arr_total > 0, blk_total / np.maximum(arr_total, 1), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        blk_batches = np.where(arr > 0, blk / np.maximum(arr, 1), np.nan)
    blocking_ci = np.array([_halfwidth(blk_batches[:, j]) for j in range(n)])

    return SimulationResult(
        mean_number=mean_number,
        mean_number_ci=mean_number_ci,
        mean_charging_time=mean_time,
        mean_charging_time_ci=mean_time_ci,
        blocking_fraction=blocking,
        blocking_fraction_ci=blocking_ci,
        arrivals=arr_total,
        departures=dep_total,
        blocked=blk_total,
        method="sim",
        seed=sim.seed,
        network=cfg,
        arrival_rates=arrivals.rates,
        horizon=sim.horizon,
        burn_in=sim.burn_in,
    )


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary law of the chain on the full state grid.

    ``states`` has shape (S, N); ``probs`` shape (S,). ``residual`` is the
    achieved infinity norm of pi @ Q.
    """

    states: np.ndarray
    probs: np.ndarray
    residual: float

    def as_dict(self):
        return {tuple(int(c) for c in s): float(p) for s, p in zip(self.states, self.probs)}

    def prob(self, state):
        """Probability of one state; zero for states outside the recurrent class."""
        return self.as_dict().get(tuple(int(c) for c in state), 0.0)


_table_cache: dict = {}


def _allocation_table(states, cfg, shape):
    """Allocations for every state on the grid; memoized, since the table is
    independent of the arrival rates."""
    key = (cfg, shape)
    table = _table_cache.get(key)
    if table is None:
        table = np.array([allocate(s, cfg) for s in states])
        table.setflags(write=False)
        _table_cache[key] = table
    return table


def build_generator(arrivals: ArrivalSpec, cfg: NetworkConfig):
    """Sparse generator matrix Q and its state grid, last coordinate fastest.

    Stations with zero arrival rate are pinned at zero occupancy: starting
    from the empty system those coordinates are never entered, so the grid
    covers exactly the recurrent class.
    """
    _check_arrivals(arrivals, cfg)
    n = cfg.n_stations
    k = cfg.capacity
    active = [j for j in range(n) if arrivals.rates[j] > 0]
    shape = tuple(k + 1 if j in active else 1 for j in range(n))
    size = int(np.prod(shape))
    if size > MAX_STATES:
        raise StateSpaceError(f"{size} states exceeds the limit {MAX_STATES}")
    states = np.stack(np.unravel_index(np.arange(size), shape), axis=1).astype(
        np.int64
    )
    power = _allocation_table(states, cfg, shape)
    strides = np.ones(n, dtype=np.int64)
    for j in range(n - 2, -1, -1):
        strides[j] = strides[j + 1] * shape[j + 1]

    rows, cols, vals = [], [], []
    idx = np.arange(size)
    for j in active:
        mask = states[:, j] < k
        rows.append(idx[mask])
        cols.append(idx[mask] + strides[j])
        vals.append(np.full(int(mask.sum()), arrivals.rates[j]))
        mask = states[:, j] > 0
        rows.append(idx[mask])
        cols.append(idx[mask] - strides[j])
        vals.append(power[mask, j])
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    q = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    q = q - sp.diags(np.asarray(q.sum(axis=1)).ravel())
    return q.tocsr(), states


def stationary_distribution(
    arrivals: ArrivalSpec, cfg: NetworkConfig
) -> StationaryDistribution:
    """Exact stationary law of the chain by shifted inverse iteration.

    Solves the global balance equations pi Q = 0 with sum(pi) = 1; raises a
    convergence error unless ``||pi Q||_inf <= 1e-10`` is achieved.
    """
    q, states = build_generator(arrivals, cfg)
    size = q.shape[0]
    if size == 1:
        return StationaryDistribution(states=states, probs=np.ones(1), residual=0.0)
    # inverse iteration on Q^T shifted slightly off its zero eigenvalue; the
    # shifted matrix stays banded and nonsingular, and the iteration locks
    # onto the stationary (Perron) direction in a handful of solves
    sigma = 1e-10
    a = (q.T - sigma * sp.identity(size, format="csr")).tocsc()
    lu = spla.splu(a)
    x = np.full(size, 1.0 / size)
    pi = None
    residual = math.inf
    for _ in range(50):
        x = lu.solve(x)
        norm = np.abs(x).max()
        if not np.isfinite(norm) or norm == 0.0:
            break
        x = x / norm
        if x.sum() < 0:
            x = -x
        cand = np.clip(x, 0.0, None)
        cand = cand / cand.sum()
        cand_res = float(np.abs(cand @ q).max())
        if cand_res < residual:
            pi, residual = cand, cand_res
        if residual <= 0.01 * STATIONARY_RESIDUAL_TOL:
            break
    residual = float(np.abs(pi @ q).max())
    if residual > STATIONARY_RESIDUAL_TOL:
        raise RuntimeError(
            f"stationary solve residual {residual:.3e} exceeds "
            f"{STATIONARY_RESIDUAL_TOL}"
        )
    return StationaryDistribution(states=states, probs=pi, residual=residual)


def exact_metrics(
    pi: StationaryDistribution, arrivals: ArrivalSpec, cfg: NetworkConfig
) -> SimulationResult:
    """Performance measures implied by a stationary law.

    Mean charging time uses Little's law with the accepted arrival rate;
    it is NaN where that rate is zero.
    """
    _check_arrivals(arrivals, cfg)
    n = cfg.n_stations
    probs = pi.probs
    states = pi.states
    mean_number = probs @ states
    blocking = np.array(
        [probs[states[:, j] == cfg.capacity].sum() for j in range(n)]
    )
    lam = np.asarray(arrivals.rates)
    accepted = lam * (1.0 - blocking)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_time = np.where(accepted > 0, mean_number / accepted, np.nan)
    zeros = np.zeros(n)
    return SimulationResult(
        mean_number=mean_number,
        mean_number_ci=zeros,
        mean_charging_time=mean_time,
        mean_charging_time_ci=zeros.copy(),
        blocking_fraction=blocking,
        blocking_fraction_ci=zeros.copy(),
        arrivals=np.zeros(n, dtype=np.int64),
        departures=np.zeros(n, dtype=np.int64),
        blocked=np.zeros(n, dtype=np.int64),
        method="exact",
        seed=None,
        network=cfg,
        arrival_rates=arrivals.rates,
    )
