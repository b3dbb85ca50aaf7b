"""twdimer-plot: render twdimer CSV output into publication-style figures.

Subcommands: `series` (time series with error bands) and `angles`
(Pi V landscape heatmap).  PNG or SVG is chosen by the --out suffix.
"""

from __future__ import annotations

import argparse
import sys

from .plots import MissingObservable, PlotSpec, plot_angle_landscape, plot_series
from .reader import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twdimer-plot")
    sub = parser.add_subparsers(dest="command", required=True)

    p_series = sub.add_parser("series", help="plot observable time series")
    p_series.add_argument("--csv", required=True, action="append",
                          help="observable CSV (repeatable)")
    p_series.add_argument("--out", required=True, help="output image (.png or .svg)")
    p_series.add_argument("--observables", required=True,
                          help="comma-separated observable ids, e.g. kappa4_simple or pi_v")
    p_series.add_argument("--title", default="")
    p_series.add_argument("--ylabel", default="")

    p_angles = sub.add_parser("angles", help="plot a Pi V angle landscape")
    p_angles.add_argument("--csv", required=True, help="angles CSV from `twdimer angles`")
    p_angles.add_argument("--out", required=True, help="output image (.png or .svg)")
    p_angles.add_argument("--title", default="")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "series":
            observables = tuple(o.strip() for o in args.observables.split(",") if o.strip())
            out = plot_series(PlotSpec(
                csv_paths=tuple(args.csv),
                observables=observables,
                out_path=args.out,
                title=args.title,
                ylabel=args.ylabel,
            ))
        else:
            out = plot_angle_landscape(args.csv, args.out, title=args.title)
    except (MissingObservable, SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
