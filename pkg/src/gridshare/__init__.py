"""EV charging on a line distribution network as a bandwidth-sharing CTMC.

Charging rates are proportional-fair power allocations constrained by a
voltage-drop feasibility set under either the lossy branch-flow recursion
("distflow") or its lossless linearization ("linearized").
"""

__version__ = "0.1.0"

from .allocator import (
    allocate,
    allocate_distflow,
    allocate_ld,
    oracle_boundary_allocate,
    pf_objective,
)
from .experiments import (
    critical_rate_curve,
    estimate_critical_rate,
    relative_difference_curve,
    run_heatmap,
    run_sweep,
)
from .markov import (
    ArrivalSpec,
    SimulationConfig,
    SimulationResult,
    exact_metrics,
    simulate,
    stationary_distribution,
    transition_rates,
)
from .powerflow import (
    Model,
    NetworkConfig,
    is_feasible,
    ld_budget,
    ld_constraint_lhs,
    max_feasible_scale,
    reconstruct_branch_flows,
    voltage_profile_distflow,
)

__all__ = [
    "__version__",
    "Model",
    "NetworkConfig",
    "ArrivalSpec",
    "SimulationConfig",
    "SimulationResult",
    "voltage_profile_distflow",
    "ld_budget",
    "ld_constraint_lhs",
    "is_feasible",
    "reconstruct_branch_flows",
    "max_feasible_scale",
    "pf_objective",
    "allocate",
    "allocate_ld",
    "allocate_distflow",
    "oracle_boundary_allocate",
    "transition_rates",
    "simulate",
    "stationary_distribution",
    "exact_metrics",
    "run_sweep",
    "estimate_critical_rate",
    "relative_difference_curve",
    "run_heatmap",
    "critical_rate_curve",
]
