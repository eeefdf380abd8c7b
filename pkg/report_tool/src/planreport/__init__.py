"""Offline figures from replanning benchmark CSVs (summary grids, ratio heatmaps)."""

from planreport.figures import (
    ReportError,
    load_summary,
    load_trace,
    make_boxplot_grid,
    make_ratio_heatmap,
    make_trajectory_snapshot,
)

__all__ = [
    "ReportError",
    "load_summary",
    "load_trace",
    "make_boxplot_grid",
    "make_ratio_heatmap",
    "make_trajectory_snapshot",
]
