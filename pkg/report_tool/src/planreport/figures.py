"""Figure builders over the harness CSV schemas.

Inputs are the summary CSV
(``space,n,c_mult,obstacles,trials,median_ms,std_ms,success_rate``), the
per-iteration trace CSV
(``trial,iter,t_now,replan_ms,n_aff,n_c,k,coll_checks,c_robot,path_len,outcome``),
and scenario JSON files. Generation is read-only and idempotent: identical
inputs produce identical image bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SUMMARY_FIELDS = ["space", "n", "c_mult", "obstacles", "trials", "median_ms",
                  "std_ms", "success_rate"]
TRACE_FIELDS = ["trial", "iter", "t_now", "replan_ms", "n_aff", "n_c", "k",
                "coll_checks", "c_robot", "path_len", "outcome"]


class ReportError(ValueError):
    """Bad or mismatched report inputs; the message names the offender."""


def _read_rows(path, expected_fields):
    path = Path(path)
    try:
        with open(path) as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != expected_fields:
                raise ReportError(
                    f"{path}: expected columns {expected_fields}, "
                    f"got {reader.fieldnames}")
            rows = list(reader)
    except FileNotFoundError as e:
        raise ReportError(f"{path}: not found") from e
    if not rows:
        raise ReportError(f"{path}: no data rows")
    return rows


def load_summary(path) -> list[dict]:
    out = []
    for row in _read_rows(path, SUMMARY_FIELDS):
        out.append({
            "space": row["space"],
            "n": int(row["n"]),
            "c_mult": float(row["c_mult"]),
            "obstacles": int(row["obstacles"]),
            "trials": int(row["trials"]),
            "median_ms": float(row["median_ms"]),
            "std_ms": float(row["std_ms"]),
            "success_rate": float(row["success_rate"]),
        })
    return out


def load_trace(path) -> list[dict]:
    out = []
    for row in _read_rows(path, TRACE_FIELDS):
        out.append({
            "trial": int(row["trial"]),
            "iter": int(row["iter"]),
            "t_now": float(row["t_now"]),
            "replan_ms": float(row["replan_ms"]),
            "c_robot": float(row["c_robot"]),
            "path_len": float(row["path_len"]),
            "outcome": row["outcome"],
        })
    return out


def _condition_key(row) -> tuple:
    return (row["space"], row["n"], row["c_mult"], row["obstacles"])


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata={"Software": "planreport"})
    plt.close(fig)
    return path


def make_boxplot_grid(summary_csv, out_dir, name="boxplot_grid.png") -> Path:
    """Median +/- std glyphs vs sample size, one subplot per (obstacles, C) cell."""
    rows = load_summary(summary_csv)
    obstacle_counts = sorted({r["obstacles"] for r in rows})
    c_mults = sorted({r["c_mult"] for r in rows})
    fig, axes = plt.subplots(len(obstacle_counts), len(c_mults),
                             figsize=(4.2 * len(c_mults), 3.2 * len(obstacle_counts)),
                             squeeze=False)
    for i, obs in enumerate(obstacle_counts):
        for j, c in enumerate(c_mults):
            ax = axes[i][j]
            cell = sorted((r["n"], r["median_ms"], r["std_ms"]) for r in rows
                          if r["obstacles"] == obs and r["c_mult"] == c)
            if not cell:
                ax.text(0.5, 0.5, "no data", ha="center", va="center",
                        transform=ax.transAxes)
            else:
                ns = [c_[0] for c_ in cell]
                med = np.array([c_[1] for c_ in cell])
                std = np.array([c_[2] for c_ in cell])
                x = np.arange(len(ns))
                ax.bar(x, 2 * std, bottom=med - std, width=0.45,
                       color="#9ecae1", edgecolor="#3182bd",
                       label="median +/- std of per-trial medians")
                ax.plot(x, med, "o-", color="#08519c", ms=4)
                ax.set_xticks(x)
                ax.set_xticklabels([str(n) for n in ns], fontsize=8)
            ax.set_title(f"{obs} obstacles, C={c:g}", fontsize=9)
            if i == len(obstacle_counts) - 1:
                ax.set_xlabel("samples")
            if j == 0:
                ax.set_ylabel("replanning time [ms]")
    fig.suptitle("Per-trial median replanning times", y=0.995)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / name)


def make_ratio_heatmap(subject_csv, baseline_csv, out_dir,
                       name="ratio_heatmap.png") -> Path:
    """Cells show baseline median / subject median; > 1 means faster subject."""
    subject = {_condition_key(r): r for r in load_summary(subject_csv)}
    baseline = {_condition_key(r): r for r in load_summary(baseline_csv)}
    missing = sorted(set(subject) ^ set(baseline))
    if missing:
        raise ReportError(f"condition keys do not match: {missing}")
    c_mults = sorted({k[2] for k in subject})
    obstacle_counts = sorted({k[3] for k in subject})
    samples = sorted({k[1] for k in subject})
    spaces = sorted({k[0] for k in subject})
    if len(spaces) != 1:
        raise ReportError(f"heatmap expects one space, got {spaces}")
    space = spaces[0]

    fig, axes = plt.subplots(1, len(c_mults), figsize=(4.6 * len(c_mults), 3.8),
                             squeeze=False)
    ratios_all = []
    for j, c in enumerate(c_mults):
        grid = np.full((len(obstacle_counts), len(samples)), np.nan)
        for oi, obs in enumerate(obstacle_counts):
            for si, n in enumerate(samples):
                key = (space, n, c, obs)
                if key in subject:
                    s = subject[key]["median_ms"]
                    b = baseline[key]["median_ms"]
                    grid[oi, si] = b / s if s > 0 else math.nan
        ratios_all.append(grid)
    vmax = max(2.0, float(np.nanmax([np.nanmax(g) for g in ratios_all])))
    for j, (c, grid) in enumerate(zip(c_mults, ratios_all)):
        ax = axes[0][j]
        im = ax.imshow(grid, cmap="RdYlGn", vmin=0.0, vmax=vmax, aspect="auto")
        ax.set_xticks(range(len(samples)))
        ax.set_xticklabels([str(n) for n in samples], fontsize=8)
        ax.set_yticks(range(len(obstacle_counts)))
        ax.set_yticklabels([str(o) for o in obstacle_counts], fontsize=8)
        ax.set_xlabel("samples")
        if j == 0:
            ax.set_ylabel("obstacles")
        ax.set_title(f"C={c:g}", fontsize=10)
        for oi in range(grid.shape[0]):
            for si in range(grid.shape[1]):
                if not math.isnan(grid[oi, si]):
                    ax.text(si, oi, f"{grid[oi, si]:.2f}", ha="center",
                            va="center", fontsize=8)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.suptitle("baseline median / subject median (higher = faster subject)")
    fig.tight_layout()
    return _save(fig, Path(out_dir) / name)


# ---------------------------------------------------------------------------
# trajectory snapshot
# ---------------------------------------------------------------------------


def _pingpong_position(waypoints, speed, t):
    pts = np.asarray(waypoints, dtype=float)
    if len(pts) == 1 or speed <= 0:
        return pts[0]
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        return pts[0]
    s = math.fmod(speed * t, 2 * total)
    if s > total:
        s = 2 * total - s
    i = min(max(int(np.searchsorted(cum, s, side="right")) - 1, 0), len(pts) - 2)
    span = cum[i + 1] - cum[i]
    f = (s - cum[i]) / span if span > 0 else 0.0
    return pts[i] + f * (pts[i + 1] - pts[i])


def make_trajectory_snapshot(scenario_json, trace_csv, out_dir, t_now=None,
                             trail_points=1500, name="snapshot.png") -> Path:
    """Arena view at one instant: inflated obstacles, motion trails, endpoints,
    plus the robot's cost profile from the trace (the CSV interfaces carry no
    tree or robot geometry, so those are not rendered)."""
    scenario_json = Path(scenario_json)
    try:
        scenario = json.loads(scenario_json.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ReportError(f"{scenario_json}: {e}") from e
    rows = load_trace(trace_csv)
    t_max = max(r["t_now"] for r in rows)
    if t_now is None:
        t_now = t_max

    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(11, 5),
                                  gridspec_kw={"width_ratios": [5, 4]})
    bounds = scenario["bounds"]
    ax.set_xlim(bounds[0])
    ax.set_ylim(bounds[1])
    ax.set_aspect("equal")
    for ob in scenario.get("obstacles", []):
        pos = _pingpong_position(ob["waypoints"], ob.get("speed", 0.0), t_now)
        r_eff = ob["radius"] + ob.get("inflation", 0.0)
        trail_t = np.linspace(max(0.0, t_now - 0.1 * trail_points), t_now, 200)
        trail = np.array([_pingpong_position(ob["waypoints"], ob.get("speed", 0.0), t)
                          for t in trail_t])
        ax.plot(trail[:, 0], trail[:, 1], color="#bbbbbb", lw=0.7, zorder=1)
        ax.add_patch(plt.Circle(pos, r_eff, color="#d95f5f", alpha=0.35, zorder=2))
        ax.add_patch(plt.Circle(pos, ob["radius"], color="#b22222", alpha=0.8,
                                zorder=3))
    ax.plot(*scenario["start"][:2], "s", color="#1a7a1a", ms=9, zorder=4)
    ax.plot(*scenario["goal"][:2], "*", color="#d4a017", ms=14, zorder=4)
    ax.set_title(f"{scenario.get('name', 'scenario')} at t={t_now:.1f}s")

    by_trial = {}
    for r in rows:
        by_trial.setdefault(r["trial"], []).append(r)
    for trial, rs in sorted(by_trial.items()):
        ts = [r["t_now"] for r in rs]
        cs = [r["c_robot"] if math.isfinite(r["c_robot"]) else math.nan for r in rs]
        ax2.plot(ts, cs, lw=1.0, label=f"trial {trial}")
    ax2.axvline(t_now, color="#888888", lw=0.8, ls="--")
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("cost-to-goal of robot node")
    ax2.set_title("robot cost over the run")
    if len(by_trial) <= 8:
        ax2.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / name)
