"""Standalone plotting script.

    regretplots regret results/regret.csv fig.png [--policies a b] [--log-x]
    regretplots means results/manifest.json means.png
"""
from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, render_means_timeline, render_regret


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regretplots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    regret = sub.add_parser("regret", help="mean regret curves with quartile bands")
    regret.add_argument("csv", help="harness regret CSV")
    regret.add_argument("out", help="output image path")
    regret.add_argument("--policies", nargs="+", help="subset of policies to draw")
    regret.add_argument("--extra-csv", nargs="*", default=(), help="additional CSVs")
    regret.add_argument("--xlabel", default="time step")
    regret.add_argument("--ylabel", default="cumulative regret")
    regret.add_argument("--title", default="")
    regret.add_argument("--log-x", action="store_true", help="log-spaced x axis")

    means = sub.add_parser("means", help="environment means timeline")
    means.add_argument("manifest", help="harness manifest.json")
    means.add_argument("out", help="output image path")
    means.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "regret":
            render_regret(
                PlotSpec(
                    csv_path=args.csv,
                    out_path=args.out,
                    policies=args.policies,
                    extra_csv_paths=tuple(args.extra_csv),
                    xlabel=args.xlabel,
                    ylabel=args.ylabel,
                    title=args.title,
                    log_x=args.log_x,
                )
            )
        else:
            render_means_timeline(args.manifest, args.out, title=args.title)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
