"""Voltage profiles and feasibility on the line network.

Walks the two power-flow models: the lossy voltage recursion, the linear
power budget of the lossless model, and how the two feasible sets nest.
"""

import numpy as np

from gridshare import (
    NetworkConfig,
    is_feasible,
    ld_budget,
    ld_constraint_lhs,
    max_feasible_scale,
    reconstruct_branch_flows,
    voltage_profile_distflow,
)

cfg = NetworkConfig(n_stations=2, resistance=0.1, delta=0.05)
cfg_ld = NetworkConfig(n_stations=2, resistance=0.1, delta=0.05, model="linearized")

print("== voltage recursion ==")
for p in ([0.0, 0.0], [0.1, 0.1], [0.3, 0.2]):
    v = voltage_profile_distflow(p, cfg)
    print(f"p={p}  ->  V={np.round(v, 6)}  (root bound {cfg.voltage_bound:.7g})")

print("\n== feasibility of p=(0.3, 0.2) ==")
print("distflow  :", is_feasible([0.3, 0.2], cfg))
print("linearized:", ld_constraint_lhs([0.3, 0.2], cfg_ld), "vs budget",
      f"{ld_budget(cfg_ld):.7g}", "->", is_feasible([0.3, 0.2], cfg_ld))

print("\n== axis capacities (largest feasible power on each axis) ==")
for d in ([1.0, 0.0], [0.0, 1.0]):
    t_d = max_feasible_scale(d, cfg)
    t_ld = max_feasible_scale(d, cfg_ld)
    print(f"direction {d}: distflow {t_d:.7g}, linearized {t_ld:.7g}")
print("the near station supports about twice the far station's power, and")
print("the lossless model overestimates every capacity (its set is larger)")

print("\n== branch flows balance the node powers ==")
p = np.array([0.3, 0.2])
v = voltage_profile_distflow(p, cfg)
flows = reconstruct_branch_flows(v, p, cfg)
sending = [f.sending_power for f in flows] + [0.0]
for j, f in enumerate(flows):
    lhs = f.sending_power - cfg.resistance * f.current**2
    print(f"edge {j}->{j+1}: I={f.current:.7g}, S={f.sending_power:.7g}, "
          f"balance residual {abs(lhs - (p[j] + sending[j + 1])):.2e}")
