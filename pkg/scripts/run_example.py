"""Solve, verify, and report one of the bundled engagement examples.

    python scripts/run_example.py 1 [--out runs/example1] [--closed-loop]
"""

import argparse
import sys

from assetguard import cli
from assetguard.scenario import bundled_scenario_path


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("example", type=int, choices=(1, 2, 3, 4))
    parser.add_argument("--out", default=None)
    parser.add_argument("--closed-loop", action="store_true")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args()

    scenario = bundled_scenario_path(f"example{args.example}")
    out = args.out or f"runs/example{args.example}"
    run_dir = cli.cmd_solve(scenario, out_dir=out, verbose=args.verbose)
    cli.cmd_verify(run_dir, closed_loop=args.closed_loop)
    cli.cmd_report(run_dir)


if __name__ == "__main__":
    sys.exit(main())
