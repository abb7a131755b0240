"""plotviz command line: frontier scatter/hull plots and savings bars."""

from __future__ import annotations

import argparse
import sys

from . import CsvFormatError, PlotSpec, plot_frontier, plot_savings_bars


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotviz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--csv", action="append", required=True,
                       help="input CSV; repeat for overlaid series")
        p.add_argument("--labels", default="",
                       help="comma-separated series labels (WP,CIP,...)")
        p.add_argument("--out", required=True, help="output image (png/svg)")
        p.add_argument("--title", default="")

    p = sub.add_parser("frontier", help="tradeoff scatter with hull overlays")
    common(p)
    p.add_argument("--xmax", type=float, default=20.0,
                   help="error-axis cap in percent")
    p.set_defaults(kind="frontier")

    p = sub.add_parser("savings", help="energy savings bars per threshold")
    common(p)
    p.set_defaults(kind="savings")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        csv_paths=args.csv,
        output=args.out,
        labels=[s for s in args.labels.split(",") if s],
        x_cap=getattr(args, "xmax", 20.0),
        title=args.title,
    )
    try:
        if args.kind == "frontier":
            plot_frontier(spec)
        else:
            plot_savings_bars(spec)
    except (CsvFormatError, OSError) as exc:
        print("plotviz: %s" % exc, file=sys.stderr)
        return 1
    print("wrote %s" % spec.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
