"""Command-line wrapper: ``figpipe render --spec <json>``."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, render  # pins the Agg backend

import matplotlib.pyplot as plt


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="figpipe", description="Regenerate experiment figures.")
    sub = parser.add_subparsers(dest="command", required=True)
    render_p = sub.add_parser("render", help="render one figure from a JSON spec")
    render_p.add_argument("--spec", required=True, help="figure spec JSON file")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.from_json_file(args.spec)
        fig = render(spec)
        plt.close(fig)
    except (OSError, ValueError) as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 1
    print(spec.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
