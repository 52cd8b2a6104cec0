"""The ``figures`` command: render one figure kind from CSV inputs."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render charging-network comparison figures from CSV files.",
    )
    parser.add_argument("--kind", required=True, choices=sorted(KINDS))
    parser.add_argument(
        "--in", dest="inputs", required=True, nargs="+", metavar="CSV",
        help="input CSV file(s) in the matching schema",
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--xlabel")
    parser.add_argument("--ylabel")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        output=args.out,
        xlabel=args.xlabel,
        ylabel=args.ylabel,
    )
    try:
        out = render(spec)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
