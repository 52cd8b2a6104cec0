"""Voltage computations and feasibility checks for a line distribution network.

The network is a feeder line: root node 0, stations 1..N, every edge with the
same per-unit resistance ``r``. Station j draws active power ``p[j-1]``.
Voltages are per-unit with the far node normalized to 1. Two models are
supported: the full recursion with ohmic losses ("distflow") and the lossless
linearization ("linearized"), which reduces to a single linear budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Model",
    "NetworkConfig",
    "BranchFlow",
    "VoltageRecursionError",
    "voltage_profile_distflow",
    "ld_budget",
    "ld_constraint_lhs",
    "is_feasible",
    "reconstruct_branch_flows",
    "max_feasible_scale",
    "voltage_gradient",
]

#: absolute tolerance on the constraint function when classifying feasibility,
#: so allocations sitting exactly on the boundary count as feasible
FEASIBILITY_TOL = 1e-9

#: absolute tolerance for the bisection in :func:`max_feasible_scale`
SCALE_TOL = 1e-10


class Model(str, Enum):
    """Power-flow model used for the voltage-drop constraint."""

    DISTFLOW = "distflow"
    LINEARIZED = "linearized"


class VoltageRecursionError(ArithmeticError):
    """A node voltage hit zero or below, so the recursion is meaningless."""

    def __init__(self, node, value):
        self.node = node
        self.value = value
        super().__init__(f"voltage recursion broke down at node {node}: V={value}")


@dataclass(frozen=True)
class NetworkConfig:
    """Line-network and policy parameters.

    Parameters
    ----------
    n_stations : int
        Number of charging stations N on the line (>= 1).
    resistance : float
        Per-unit resistance r of every edge (> 0).
    delta : float
        Maximum relative voltage drop, in (0, 0.5].
    capacity : int
        Parking spaces K per station (>= 1).
    model : Model
        Which feasibility model constrains the allocations.
    """

    n_stations: int
    resistance: float = 0.1
    delta: float = 0.05
    capacity: int = 100
    model: Model = Model.DISTFLOW

    def __post_init__(self):
        if self.n_stations < 1:
            raise ValueError(f"n_stations must be >= 1, got {self.n_stations}")
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if not self.resistance > 0:
            raise ValueError(f"resistance must be > 0, got {self.resistance}")
        if not 0 < self.delta <= 0.5:
            raise ValueError(f"delta must lie in (0, 0.5], got {self.delta}")
        object.__setattr__(self, "model", Model(self.model))

    @property
    def voltage_bound(self):
        """Upper bound 1/(1-delta) on the root voltage."""
        return 1.0 / (1.0 - self.delta)


@dataclass(frozen=True)
class BranchFlow:
    """Real current and sending-end power on one edge of the line."""

    current: float
    sending_power: float


def _as_power(p, cfg: NetworkConfig) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (cfg.n_stations,):
        raise ValueError(
            f"expected {cfg.n_stations} power entries, got shape {p.shape}"
        )
    if np.any(p < 0):
        raise ValueError("power entries must be nonnegative")
    return p


def voltage_profile_distflow(p, cfg: NetworkConfig) -> np.ndarray:
    """Node voltages V_0..V_N under the lossy recursion, far node at 1.

    Parameters
    ----------
    p : array_like
        Active power drawn at stations 1..N (nonnegative).
    cfg : NetworkConfig

    Returns
    -------
    numpy.ndarray
        Voltages indexed by node, ``v[n] == 1`` exactly.

    Raises
    ------
    VoltageRecursionError
        If an intermediate voltage drops to zero or below.
    """
    p = _as_power(p, cfg)
    n = cfg.n_stations
    r = cfg.resistance
    v = np.empty(n + 1)
    v[n] = 1.0
    v[n - 1] = 1.0 + r * p[n - 1]
    for j in range(n - 1, 0, -1):
        if v[j] <= 0:
            raise VoltageRecursionError(j, v[j])
        v[j - 1] = 2.0 * v[j] - v[j + 1] + r * p[j - 1] / v[j]
    if np.any(v <= 0):
        node = int(np.argmin(v))
        raise VoltageRecursionError(node, v[node])
    return v


def root_voltage_batch(powers: np.ndarray, r: float) -> np.ndarray:
    """Root voltage V_0 for a batch of power vectors, shape (M, N) -> (M,).

    Vectorized across rows; assumes nonnegative entries (the recursion then
    cannot break down).
    """
    powers = np.asarray(powers, dtype=float)
    m, n = powers.shape
    v_next = np.ones(m)  # V_{j+1}
    v = 1.0 + r * powers[:, n - 1]  # V_j, starting at j = N-1
    for j in range(n - 1, 0, -1):
        v, v_next = 2.0 * v - v_next + r * powers[:, j - 1] / v, v
    return v


def ld_budget(cfg: NetworkConfig) -> float:
    """Right-hand side delta*(2-delta)/(1-delta)^2 of the linearized constraint."""
    d = cfg.delta
    return d * (2.0 - d) / (1.0 - d) ** 2


def ld_coefficients(cfg: NetworkConfig) -> np.ndarray:
    """Linear weights 2*r*j on station powers in the linearized constraint."""
    return 2.0 * cfg.resistance * np.arange(1, cfg.n_stations + 1, dtype=float)


def ld_constraint_lhs(p, cfg: NetworkConfig) -> float:
    """Left-hand side 2r * sum_j sum_{k>=j} p_k of the linearized constraint."""
    p = _as_power(p, cfg)
    return float(ld_coefficients(cfg) @ p)


def is_feasible(p, cfg: NetworkConfig, tol: float = FEASIBILITY_TOL) -> bool:
    """Whether allocation ``p`` satisfies the voltage-drop constraint of the model."""
    p = _as_power(p, cfg)
    if cfg.model is Model.LINEARIZED:
        return ld_constraint_lhs(p, cfg) <= ld_budget(cfg) + tol
    try:
        v = voltage_profile_distflow(p, cfg)
    except VoltageRecursionError:
        return False
    return v[0] <= cfg.voltage_bound + tol


def reconstruct_branch_flows(v, p, cfg: NetworkConfig) -> list[BranchFlow]:
    """Per-edge current and sending-end power implied by a voltage profile.

    ``current = (V_{j-1} - V_j) / r`` by Ohm's law and
    ``sending_power = V_{j-1} * current``. The node power balance
    ``S_{j-1,j} - r I^2 = p_j + S_{j,j+1}`` (with S past the last node zero)
    holds when ``v`` is the lossy profile for ``p``.
    """
    p = _as_power(p, cfg)
    v = np.asarray(v, dtype=float)
    if v.shape != (cfg.n_stations + 1,):
        raise ValueError(
            f"expected {cfg.n_stations + 1} voltages for {cfg.n_stations} stations, "
            f"got shape {v.shape}"
        )
    r = cfg.resistance
    flows = []
    for j in range(1, cfg.n_stations + 1):
        current = (v[j - 1] - v[j]) / r
        flows.append(BranchFlow(current=current, sending_power=v[j - 1] * current))
    return flows


def max_feasible_scale(direction, cfg: NetworkConfig) -> float:
    """Largest t >= 0 such that ``t * direction`` is feasible.

    Closed form for the linearized model; bisection (absolute tolerance
    ``SCALE_TOL``) against the root-voltage bound for the lossy model. The
    linearized scale is a valid upper bracket because the lossy feasible set
    is contained in the linearized one.
    """
    d = _as_power(direction, cfg)
    lhs = ld_constraint_lhs(d, cfg)
    if lhs == 0.0:
        raise ValueError("direction must have at least one positive entry")
    t_ld = ld_budget(cfg) / lhs
    if cfg.model is Model.LINEARIZED:
        return t_ld
    bound = cfg.voltage_bound
    row = d[np.newaxis, :]
    lo, hi = 0.0, t_ld
    if root_voltage_batch(hi * row, cfg.resistance)[0] <= bound:
        return hi
    while hi - lo > SCALE_TOL:
        mid = 0.5 * (lo + hi)
        if root_voltage_batch(mid * row, cfg.resistance)[0] <= bound:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def voltage_gradient(p, cfg: NetworkConfig) -> np.ndarray:
    """Gradient of the root voltage V_0 with respect to the station powers.

    Obtained by differentiating the voltage recursion; O(N^2) but N is small.
    """
    p = _as_power(p, cfg)
    n = cfg.n_stations
    r = cfg.resistance
    v = voltage_profile_distflow(p, cfg)
    # dv[j, k] = dV_j / dp_{k+1}
    dv = np.zeros((n + 1, n))
    dv[n - 1, n - 1] = r
    for j in range(n - 1, 0, -1):
        dv[j - 1] = 2.0 * dv[j] - dv[j + 1] - r * p[j - 1] * dv[j] / v[j] ** 2
        dv[j - 1, j - 1] += r / v[j]
    return dv[0]
