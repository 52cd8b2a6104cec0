"""Proportional-fair power allocation over the voltage-drop feasible sets.

Given the occupancy vector X, charging rates maximize
``sum_j X_j * log(p_j / X_j)`` over the model's feasible set, with empty
stations forced to zero. The linearized model has a water-filling style
closed form; the lossy model is solved by Newton iteration on the KKT
system of the single active voltage constraint, warm-started from the
linearized solution rescaled onto the boundary.
"""

from __future__ import annotations

import math
from threading import Lock

import numpy as np

from .powerflow import (
    Model,
    NetworkConfig,
    ld_budget,
    ld_coefficients,
    is_feasible,
    max_feasible_scale,
    root_voltage_batch,
    voltage_gradient,
    voltage_profile_distflow,
)

__all__ = [
    "SolverError",
    "pf_objective",
    "allocate_ld",
    "allocate_distflow",
    "allocate",
    "oracle_boundary_allocate",
    "clear_allocation_cache",
]

#: stop the KKT iteration once the residual is below this (scaled) level
KKT_TOL = 1e-12
KKT_MAX_ITER = 200


class SolverError(RuntimeError):
    """Allocation solver failed to converge; carries the best iterate."""

    def __init__(self, message, best_p=None, residual=None):
        self.best_p = best_p
        self.residual = residual
        super().__init__(message)


def _as_state(x, cfg: NetworkConfig) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (cfg.n_stations,):
        raise ValueError(f"expected {cfg.n_stations} counts, got shape {x.shape}")
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise ValueError("counts must be nonnegative integers")
    if np.any(x > cfg.capacity):
        raise ValueError(f"counts exceed capacity {cfg.capacity}")
    return x.astype(np.int64)


def pf_objective(x, p) -> float:
    """Proportional-fairness objective sum_j X_j log(p_j / X_j).

    Stations with X_j = 0 contribute zero regardless of p_j. Raises if a
    busy station has nonpositive power (the objective would be -inf).
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape != p.shape:
        raise ValueError("state and allocation must have the same length")
    busy = x > 0
    if np.any(p[busy] <= 0):
        raise ValueError("allocation must be positive wherever the station is busy")
    return float(np.sum(x[busy] * np.log(p[busy] / x[busy])))


def allocate_ld(x, cfg: NetworkConfig) -> np.ndarray:
    """Closed-form proportional-fair optimum under the linearized constraint.

    ``p_k = (X_k / sum X) * B / (2 r k)`` on busy stations, zero elsewhere.
    """
    x = _as_state(x, cfg)
    total = x.sum()
    p = np.zeros(cfg.n_stations)
    if total == 0:
        return p
    busy = x > 0
    p[busy] = (x[busy] / total) * ld_budget(cfg) / ld_coefficients(cfg)[busy]
    return p


def _kkt_residual(p, mu, w, bound, cfg):
    grad = voltage_gradient(p, cfg)
    v0 = voltage_profile_distflow(p, cfg)[0]
    busy = w > 0
    res = np.concatenate([w[busy] / p[busy] - mu * grad[busy], [v0 - bound]])
    return res, grad, v0


def _voltage_hessian(p, cfg, busy, step=1e-7):
    """Hessian of V_0 restricted to busy coordinates, by central differences
    of the analytic gradient."""
    idx = np.flatnonzero(busy)
    h = np.empty((idx.size, idx.size))
    for a, k in enumerate(idx):
        pp = p.copy()
        pp[k] += step
        gp = voltage_gradient(pp, cfg)[idx]
        pm = p.copy()
        pm[k] = max(pm[k] - step, 0.0)
        gm = voltage_gradient(pm, cfg)[idx]
        h[:, a] = (gp - gm) / (pp[k] - pm[k])
    return 0.5 * (h + h.T)


def allocate_distflow(x, cfg: NetworkConfig) -> np.ndarray:
    """Proportional-fair optimum under the lossy voltage constraint.

    Newton iteration on the KKT conditions of the (always active) root-voltage
    constraint, damped to keep powers positive. Warm start: linearized
    solution rescaled to the lossy boundary.
    """
    x = _as_state(x, cfg)
    total = x.sum()
    n = cfg.n_stations
    if total == 0:
        return np.zeros(n)
    busy = x > 0
    w = np.zeros(n)
    w[busy] = x[busy] / total

    if busy.sum() == 1:
        p = np.zeros(n)
        axis = np.zeros(n)
        axis[busy] = 1.0
        p[busy] = max_feasible_scale(axis, cfg)
        return p

    bound = cfg.voltage_bound
    p0 = allocate_ld(x, cfg)
    p = p0 * max_feasible_scale(p0, cfg)

    grad = voltage_gradient(p, cfg)
    mu = float(np.mean(w[busy] / (p[busy] * grad[busy])))

    res, grad, _ = _kkt_residual(p, mu, w, bound, cfg)
    best_p, best_norm = p.copy(), np.linalg.norm(res, np.inf)
    idx = np.flatnonzero(busy)
    m = idx.size
    for _ in range(KKT_MAX_ITER):
        norm = np.linalg.norm(res, np.inf)
        if norm <= KKT_TOL * max(1.0, abs(mu)):
            return p
        hess = _voltage_hessian(p, cfg, busy)
        jac = np.zeros((m + 1, m + 1))
        jac[:m, :m] = np.diag(-w[idx] / p[idx] ** 2) - mu * hess
        jac[:m, m] = -grad[idx]
        jac[m, :m] = grad[idx]
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular KKT system: {exc}", best_p, best_norm)
        alpha = 1.0
        while alpha > 1e-12:
            p_new = p.copy()
            p_new[idx] = p[idx] + alpha * step[:m]
            mu_new = mu + alpha * step[m]
            if np.all(p_new[idx] > 0):
                res_new, grad_new, _ = _kkt_residual(p_new, mu_new, w, bound, cfg)
                if np.linalg.norm(res_new, np.inf) < norm or alpha == 1.0:
                    break
            alpha *= 0.5
        p, mu, res, grad = p_new, mu_new, res_new, grad_new
        if np.linalg.norm(res, np.inf) < best_norm:
            best_p, best_norm = p.copy(), np.linalg.norm(res, np.inf)
    raise SolverError(
        f"KKT iteration did not converge (residual {best_norm:.3e})",
        best_p,
        best_norm,
    )


_cache: dict = {}
_cache_lock = Lock()


def clear_allocation_cache():
    with _cache_lock:
        _cache.clear()


def _cache_key(x: np.ndarray, cfg: NetworkConfig):
    # the optimum depends on x only through its direction, so reduce by the gcd
    g = int(np.gcd.reduce(x)) if x.any() else 1
    return (cfg, tuple(int(c) // max(g, 1) for c in x))


def allocate(x, cfg: NetworkConfig) -> np.ndarray:
    """Proportional-fair allocation for occupancy ``x``, dispatched by model.

    Results are cached per (config, state direction); the state space is
    finite so the cache stays bounded. Returned arrays are copies.
    """
    x = _as_state(x, cfg)
    key = _cache_key(x, cfg)
    with _cache_lock:
        hit = _cache.get(key)
    if hit is not None:
        return hit.copy()
    if cfg.model is Model.LINEARIZED:
        p = allocate_ld(x, cfg)
    else:
        p = allocate_distflow(x, cfg)
    with _cache_lock:
        _cache.setdefault(key, p)
    return p.copy()


def _boundary_scale_batch(directions: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    """Vectorized max feasible scale along each direction row."""
    coeff = ld_coefficients(cfg)
    t_ld = ld_budget(cfg) / (directions @ coeff)
    if cfg.model is Model.LINEARIZED:
        return t_ld
    bound = cfg.voltage_bound
    lo = np.zeros_like(t_ld)
    hi = t_ld.copy()
    # lossy set is inside the linearized one, so t_ld brackets the root
    ok = root_voltage_batch(hi[:, None] * directions, cfg.resistance) <= bound
    lo[ok] = hi[ok]
    for _ in range(45):
        mid = 0.5 * (lo + hi)
        v0 = root_voltage_batch(mid[:, None] * directions, cfg.resistance)
        inside = v0 <= bound
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _angle_box_grid(lows, highs, resolution):
    """Cartesian grid of interior angles over the given box, shape (R^m or R, m)."""
    axes = [
        low + (high - low) * np.arange(1, resolution) / resolution
        for low, high in zip(lows, highs)
    ]
    if len(axes) == 1:
        return axes[0][:, None]
    a, b = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def _angles_to_directions(angles):
    """Map angle rows to unit directions in the positive orthant (m = 2 or 3)."""
    if angles.shape[1] == 1:
        theta = angles[:, 0]
        return np.column_stack([np.cos(theta), np.sin(theta)])
    theta, phi = angles[:, 0], angles[:, 1]
    return np.column_stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)]
    )


def _best_on_boundary(xb, busy, lows, highs, resolution, cfg, chunk):
    angles = _angle_box_grid(lows, highs, resolution)
    best_obj, best_angle, best_p = -np.inf, None, None
    for start in range(0, angles.shape[0], chunk):
        block = angles[start : start + chunk]
        block_dirs = _angles_to_directions(block)
        dirs = np.zeros((block_dirs.shape[0], cfg.n_stations))
        dirs[:, busy] = block_dirs
        t = _boundary_scale_batch(dirs, cfg)
        pb = t[:, None] * block_dirs
        obj = np.sum(xb * np.log(pb / xb), axis=1)
        k = int(np.argmax(obj))
        if obj[k] > best_obj:
            best_obj, best_angle, best_p = obj[k], block[k], pb[k]
    return best_obj, best_angle, best_p


def oracle_boundary_allocate(
    x,
    cfg: NetworkConfig,
    angular_resolution: int = 10_000,
    refine: int = 0,
    chunk: int = 2_000_000,
) -> np.ndarray:
    """Brute-force reference allocation by enumerating boundary points.

    Directions on the nonnegative unit sphere restricted to busy coordinates
    are enumerated at the given angular resolution, scaled onto the constraint
    boundary, and scored with the proportional-fairness objective. With
    ``refine > 0`` the angular grid is re-enumerated that many times inside
    the best cell, multiplying the effective resolution without the full-grid
    cost (useful for 3 busy stations, where a flat grid is too coarse).
    Supports N in {2, 3} only (the grid blows up combinatorially beyond that).
    """
    x = _as_state(x, cfg)
    if cfg.n_stations > 3:
        raise ValueError("oracle supports at most 3 stations")
    if x.sum() == 0:
        raise ValueError("oracle needs at least one EV in the system")
    busy = np.flatnonzero(x > 0)
    m = busy.size
    p = np.zeros(cfg.n_stations)
    if m == 1:
        axis = np.zeros(cfg.n_stations)
        axis[busy] = 1.0
        p[busy] = max_feasible_scale(axis, cfg)
        return p

    xb = x[busy].astype(float)
    lows = np.zeros(m - 1)
    highs = np.full(m - 1, np.pi / 2.0)
    best_p = None
    for _ in range(refine + 1):
        _, best_angle, best_p = _best_on_boundary(
            xb, busy, lows, highs, angular_resolution, cfg, chunk
        )
        width = (highs - lows) / angular_resolution
        lows = np.maximum(best_angle - width, 0.0)
        highs = np.minimum(best_angle + width, np.pi / 2.0)
    p[busy] = best_p
    return p
