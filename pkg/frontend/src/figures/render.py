"""Render experiment CSVs into comparison figures.

Every figure follows one style table: the lossy "distflow" model is drawn
dashed, the lossless "linearized" model solid, and parking lots get distinct
colors. Output defaults to a vector format (PDF) when the output path has no
recognized image suffix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "figures"  # deterministic SVG ids
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["FigureSpec", "SchemaError", "render", "KINDS"]

#: one place for the plotting conventions so figures stay comparable
MODEL_STYLE = {"distflow": "--", "linearized": "-"}
MODEL_LABEL = {"distflow": "Distflow", "linearized": "Linearized Distflow"}
LOT_COLOR = {1: "tab:blue", 2: "tab:red", 3: "tab:green"}
HEAT_CMAP = "viridis"
VECTOR_SUFFIX = ".pdf"
IMAGE_SUFFIXES = (".pdf", ".svg", ".png", ".ps", ".eps")

SWEEP_COLUMNS = [
    "model", "method", "lot", "lambda_lot", "total_rate", "fraction_1",
    "mean_number", "mean_number_ci", "mean_time", "mean_time_ci",
    "blocking", "seed", "horizon", "burn_in",
]
HEATMAP_COLUMNS = ["model", "total_rate", "fraction_1", "total_mean_number", "ci"]
CRITICAL_COLUMNS = ["model", "fraction_1", "critical_rate", "grid_step"]

KINDS = {
    "sweep_means": SWEEP_COLUMNS,
    "sweep_times": SWEEP_COLUMNS,
    "relative_difference": SWEEP_COLUMNS,
    "heatmap": HEATMAP_COLUMNS,
    "critical_curve": CRITICAL_COLUMNS,
}


class SchemaError(ValueError):
    """An input CSV does not match the schema its figure kind expects."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: figure kind, input CSV paths, output image path."""

    kind: str
    inputs: tuple
    output: str
    xlabel: str | None = None
    ylabel: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {sorted(KINDS)}"
            )
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _load(path, expected):
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: file has no header row") from exc
    got = list(frame.columns)
    if got != expected:
        missing = [c for c in expected if c not in got]
        extra = [c for c in got if c not in expected]
        raise SchemaError(
            f"{path}: column mismatch (missing {missing or 'none'}, "
            f"unexpected {extra or 'none'})"
        )
    if frame.empty:
        raise SchemaError(f"{path}: no data rows (header-only file)")
    return frame


def _read_inputs(spec: FigureSpec) -> pd.DataFrame:
    expected = KINDS[spec.kind]
    frames = [_load(path, expected) for path in spec.inputs]
    return pd.concat(frames, ignore_index=True)


def _style(model):
    return MODEL_STYLE.get(model, ":"), MODEL_LABEL.get(model, model)


def _sweep_panel(ax, data, column, ylabel):
    for (model, lot), group in sorted(data.groupby(["model", "lot"])):
        group = group.sort_values("lambda_lot")
        ls, label = _style(model)
        ax.plot(
            group["lambda_lot"],
            group[column],
            ls,
            color=LOT_COLOR.get(int(lot), "tab:gray"),
            label=f"{label}, lot {int(lot)}",
        )
    ax.set_xlabel("arrival rate per lot")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)


def _draw_sweep(spec, data, column, ylabel):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    _sweep_panel(ax, data, column, spec.ylabel or ylabel)
    if spec.xlabel:
        ax.set_xlabel(spec.xlabel)
    return fig


def _draw_relative_difference(spec, data):
    totals = data.groupby(["model", "total_rate"])["mean_number"].sum().unstack(0)
    for model in ("distflow", "linearized"):
        if model not in totals.columns:
            raise SchemaError(
                f"relative_difference needs rows for both models; missing {model!r}"
            )
    with np.errstate(invalid="ignore", divide="ignore"):
        pct = 100.0 * (totals["distflow"] - totals["linearized"]) / totals["distflow"]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(pct.index, pct.to_numpy(), "-", color="tab:blue")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel(spec.xlabel or "total arrival rate")
    ax.set_ylabel(spec.ylabel or "relative difference in mean number of EVs (%)")
    return fig


def _draw_heatmap(spec, data):
    models = sorted(data["model"].unique())
    fig, axes = plt.subplots(
        1, len(models), figsize=(4.6 * len(models), 3.8), squeeze=False
    )
    for ax, model in zip(axes[0], models):
        sub = data[data["model"] == model]
        grid = sub.pivot_table(
            index="fraction_1", columns="total_rate", values="total_mean_number"
        ).sort_index()
        mesh = ax.pcolormesh(
            grid.columns.to_numpy(), grid.index.to_numpy(), grid.to_numpy(),
            cmap=HEAT_CMAP, shading="nearest",
        )
        fig.colorbar(mesh, ax=ax, label="total mean number of EVs")
        ax.set_title(MODEL_LABEL.get(model, model))
        ax.set_xlabel(spec.xlabel or "total arrival rate")
        ax.set_ylabel(spec.ylabel or "fraction of arrivals to lot 1")
    return fig


def _draw_critical_curve(spec, data):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for model, group in sorted(data.groupby("model")):
        group = group.sort_values("fraction_1")
        ls, label = _style(model)
        ax.plot(group["fraction_1"], group["critical_rate"], ls,
                color="tab:blue" if model == "distflow" else "tab:red",
                marker="o", ms=3, label=label)
    ax.set_xlabel(spec.xlabel or "fraction of arrivals to lot 1")
    ax.set_ylabel(spec.ylabel or "critical arrival rate per lot")
    ax.legend(fontsize=8)
    return fig


def render(spec: FigureSpec) -> str:
    """Draw the figure described by ``spec``; returns the output path."""
    data = _read_inputs(spec)
    if spec.kind == "sweep_means":
        fig = _draw_sweep(spec, data, "mean_number", "mean number of EVs")
    elif spec.kind == "sweep_times":
        fig = _draw_sweep(spec, data, "mean_time", "mean charging time")
    elif spec.kind == "relative_difference":
        fig = _draw_relative_difference(spec, data)
    elif spec.kind == "heatmap":
        fig = _draw_heatmap(spec, data)
    else:
        fig = _draw_critical_curve(spec, data)
    out = spec.output
    if not out.lower().endswith(IMAGE_SUFFIXES):
        out += VECTOR_SUFFIX
    fig.tight_layout()
    # strip volatile metadata so identical inputs give identical files
    metadata = {"Date": None} if out.lower().endswith((".svg", ".ps", ".eps")) else {}
    try:
        fig.savefig(out, metadata=metadata or None)
    finally:
        plt.close(fig)
    return out
