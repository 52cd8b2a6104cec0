"""Figure rendering for charging-network experiment CSVs.

Consumes only the CSV files written by the ``gridshare`` command; no access
to that package's internals. Five figure kinds: sweep_means, sweep_times,
relative_difference, heatmap, critical_curve.
"""

__version__ = "0.1.0"

from .render import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render", "__version__"]
