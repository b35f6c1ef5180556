"""Command-line entry point: ``cointrr-plots render``.

Exit codes: 0 on success, 2 for any input problem (missing or malformed CSV,
unsupported schema version, unknown kind, bad style flags). The rendered
output path is printed on success.
"""

from __future__ import annotations

import argparse
import sys

from .errors import PlotsError
from .figures import KINDS, PlotJob, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cointrr-plots",
        description="Render figures from the experiment CLI's results.csv files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure from one results.csv")
    p_render.add_argument("--kind", required=True, choices=KINDS, help="figure kind")
    p_render.add_argument("--in", dest="input_csv", required=True, metavar="RESULTS_CSV")
    p_render.add_argument("--out", dest="output", required=True, metavar="IMAGE_PATH")
    p_render.add_argument(
        "--smooth", type=int, default=0, metavar="WINDOW",
        help="moving-average window for mspe curves (default: off)",
    )
    p_render.add_argument("--dpi", type=int, default=100)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        job = PlotJob(
            input_csv=args.input_csv,
            kind=args.kind,
            output=args.output,
            style={"dpi": args.dpi, "smooth_window": args.smooth},
        )
        out = render(job)
    except PlotsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
