"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import sys

from . import __version__
from .errors import ConfigError, NumericalError, TurbGreenError
from .runner import run
from .scenario import load_scenario, with_overrides

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser():
    p = argparse.ArgumentParser(prog="turbgreen", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run a scenario and write its output files")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory (default: scenario 'output' or ./out)")
    r.add_argument("--seed", type=int)
    r.add_argument("--convention", choices=("gaussian", "paper"))
    r.add_argument("--threads", type=int, default=1, help="Monte Carlo worker threads")
    r.add_argument("--no-cache", action="store_true", help="bypass the result cache")
    v = sub.add_parser("validate", help="parse and check a scenario without running it")
    v.add_argument("scenario")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.action == "validate":
            print(f"{args.scenario}: ok ({scenario.command})")
            return EXIT_OK
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        scenario = with_overrides(scenario, seed=args.seed, convention=args.convention)
        bundle = run(scenario, workers=args.threads, use_cache=not args.no_cache)
        out = bundle.write(args.out or scenario.output or "out")
    except (ConfigError, OSError) as exc:
        print(f"turbgreen: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"turbgreen: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TurbGreenError, ValueError) as exc:
        print(f"turbgreen: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    state = "cached" if bundle.cached else "computed"
    print(f"{bundle.digest[:16]} {state} -> {out}")
    return EXIT_OK
