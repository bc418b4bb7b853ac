"""Command-line entry: sdefigs render --kind {drift,convergence}."""
from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdefigs", description="Render harness CSV files as figures."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from CSV input(s)")
    p.add_argument("--kind", required=True, choices=("drift", "convergence"))
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input CSV file(s)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(sys.argv[1:] if argv is None else argv)
    try:
        spec = FigureSpec(inputs=args.inputs, kind=args.kind, out=args.out,
                          dpi=args.dpi)
        render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
