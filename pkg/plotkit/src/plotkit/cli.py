"""Command line: `plot --figure <id> --results <dir> --out <file>`."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, MissingColumn, NoInputData, render_from_results


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Regenerate comparison figures from sweep results"
    )
    parser.add_argument("--figure", required=True, choices=FIGURE_IDS)
    parser.add_argument("--results", required=True, help="sweep results directory")
    parser.add_argument("--out", required=True, help="output image path (.svg or .png)")
    parser.add_argument(
        "--smooth",
        type=int,
        default=1,
        metavar="N",
        help="optional N-round moving average (default: plot raw points)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = render_from_results(args.figure, args.results, args.out, args.smooth)
    except (MissingColumn, NoInputData, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {result.path} ({len(result.series_labels)} series)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
