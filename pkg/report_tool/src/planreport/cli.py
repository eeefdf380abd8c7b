"""Command-line entry points: boxplot grids, ratio heatmaps, snapshots."""

from __future__ import annotations

import argparse
import sys

from planreport.figures import (
    ReportError,
    make_boxplot_grid,
    make_ratio_heatmap,
    make_trajectory_snapshot,
)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="planreport",
                                 description="figures from benchmark CSVs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("boxplot", help="median grid from a summary CSV")
    p.add_argument("--summary", required=True)
    p.add_argument("--out", default="figures")

    p = sub.add_parser("heatmap", help="performance-ratio heatmap")
    p.add_argument("--subject", required=True, help="summary CSV being evaluated")
    p.add_argument("--baseline", required=True, help="summary CSV to divide by")
    p.add_argument("--out", default="figures")

    p = sub.add_parser("snapshot", help="arena snapshot from scenario + trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--time", type=float, default=None)
    p.add_argument("--out", default="figures")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "boxplot":
            path = make_boxplot_grid(args.summary, args.out)
        elif args.command == "heatmap":
            path = make_ratio_heatmap(args.subject, args.baseline, args.out)
        else:
            path = make_trajectory_snapshot(args.scenario, args.trace, args.out,
                                            t_now=args.time)
    except ReportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
