"""Model comparison at desk scale: sweep, critical rates, gap, heat map.

Uses a reduced capacity (K=20) so everything finishes in seconds; the
qualitative picture matches the full K=100 study: the lossless model sits
below the lossy one, both explode near the same critical rate, and the gap
between them grows sharply near criticality.
"""

import numpy as np

from gridshare import (
    NetworkConfig,
    estimate_critical_rate,
    relative_difference_curve,
    run_heatmap,
    run_sweep,
)

grid = [round(g, 10) for g in np.arange(0.02, 0.401, 0.01)]
tables = {}
for model in ("distflow", "linearized"):
    cfg = NetworkConfig(n_stations=2, resistance=0.1, delta=0.05,
                        capacity=20, model=model)
    tables[model] = run_sweep(grid, [0.5, 0.5], cfg, method="exact")

print("== critical per-lot arrival rates (max-jump estimate) ==")
for model, est in estimate_critical_rate(
    tables["distflow"] + tables["linearized"]
).items():
    print(f"{model:10s}: {est.rate:.4f}  (pair {est.lower:.3f}..{est.upper:.3f}, "
          f"explosive={est.explosive})")

print("\n== relative gap in total mean number (lossy minus lossless) ==")
curve = relative_difference_curve(tables["distflow"], tables["linearized"])
for rate, pct in curve[::6]:
    bar = "#" * int(max(pct, 0) / 1.5)
    print(f"total rate {2 * rate:.2f}: {pct:6.2f}% {bar}")

print("\n== heat map slice at total rate 0.8 ==")
cfg = NetworkConfig(n_stations=2, resistance=0.1, delta=0.05, capacity=20)
rows = run_heatmap([0.8], [0.25, 0.5, 0.75], cfg, method="exact")
for r in rows:
    print(f"fraction to lot 1 (far station) = {r.fraction_1:.2f}: "
          f"total mean number {r.total_mean_number:.2f}")
print("loading the weak far end clears the strong station, so the total falls")
