"""Command line entry: plot --csv <paths...> --eps 0.1 --out <dir>."""

from __future__ import annotations

import argparse
import sys

from .render import CurveSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render sweep CSVs into threshold and PUPE figures.")
    parser.add_argument("--csv", nargs="+", required=True, help="sweep CSV paths")
    parser.add_argument("--eps", type=float, default=0.1, help="target PUPE")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--bound-csv", default=None, help="optional bound CSV overlay")
    args = parser.parse_args(argv)
    try:
        sidecar = render(CurveSpec(csv_paths=args.csv, eps=args.eps,
                                   out_dir=args.out, bound_csv=args.bound_csv))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for fig in sidecar["figures"]:
        print(fig)
    return 0


if __name__ == "__main__":
    sys.exit(main())
