"""Command-line figure renderer.

Usage::

    render --kind fig1 --csv results.csv --out fig1.png

Reads one experiment results CSV and writes one image.  ``--overlay`` and
``--vmarker`` override the kind's default theory annotations; a ``--vmarker``
argument is a CSV column name or a literal x position.

Exit codes: 0 success; 1 usage error; 2 bad CSV, missing column, or invalid
parameters.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .data import FigureError
from .render import KINDS, FigureSpec, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _vmarker(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def build_parser() -> _Parser:
    parser = _Parser(prog="render", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"render {__version__}")
    parser.add_argument("--kind", required=True, choices=sorted(KINDS), help="figure layout")
    parser.add_argument("--csv", required=True, help="experiment results CSV to read")
    parser.add_argument("--out", required=True, help="image file to write (extension picks the format)")
    parser.add_argument(
        "--overlay",
        action="append",
        metavar="COLUMN",
        help="override the default overlay curves (repeatable)",
    )
    parser.add_argument(
        "--vmarker",
        action="append",
        type=_vmarker,
        metavar="COLUMN_OR_X",
        help="override the default vertical markers (repeatable)",
    )
    parser.add_argument("--title", help="figure title")
    parser.add_argument("--dpi", type=int, default=150, help="raster resolution (default 150)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse funnels usage errors and --help here
        return int(exc.code or 0)
    spec = FigureSpec(
        kind=args.kind,
        csv_path=args.csv,
        out_path=args.out,
        overlays=None if args.overlay is None else tuple(args.overlay),
        vertical_markers=None if args.vmarker is None else tuple(args.vmarker),
        title=args.title,
        dpi=args.dpi,
    )
    try:
        path = render(spec)
    except (FigureError, OSError) as exc:
        print(f"render: error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
