import argparse

import pandas as pd
import structlog

from mubkit.errors import CheckFailedError, InvalidDimensionError
from mubkit.services.selftest import quote_map, run_selftest

logger = structlog.get_logger()


def register(subparsers):
    parser = subparsers.add_parser(
        "selftest",
        help="run the identity checks for every dimension up to --max-d",
    )
    parser.add_argument("--max-d", type=int, default=9)
    parser.add_argument("--quote-check", action="store_true", help=argparse.SUPPRESS)
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    if args.max_d < 2:
        raise InvalidDimensionError(f"--max-d must be at least 2, got {args.max_d}")

    result = run_selftest(args.max_d)
    with pd.option_context("display.max_columns", None, "display.width", 250):
        print(result.frame().to_string())

    if args.quote_check:
        print()
        for name, text in quote_map().items():
            print(f"{name:<26} {text}")

    failure = result.first_failure
    if failure is not None:
        raise CheckFailedError(
            f"{failure.check} failed at d={failure.d}: deviation {failure.deviation:.3e} ({failure.identity})"
        )
    print(f"all checks passed for d <= {args.max_d}")
    return 0
