"""Command line: ``flowplots render <csv...> --out DIR``."""

import argparse
import sys

from .render import render_report


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="flowplots",
        description="Render gkflow CSV time series and refinement tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    rend = sub.add_parser("render", help="render figures and a summary table")
    rend.add_argument("csvs", nargs="*", help="series.csv / refinement.csv files")
    rend.add_argument("--out", default="flowplots_out")
    args = parser.parse_args(argv)
    if not args.csvs:
        parser.error("no input CSVs given")
    try:
        manifest = render_report(args.csvs, args.out)
    except ValueError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 2
    for fig in manifest["figures"]:
        sys.stdout.write("wrote %s\n" % fig)
    sys.stdout.write("wrote %s\n" % manifest["summary"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
