import argparse
from pathlib import Path

import structlog

from mubkit.services.suite import get_suite_service
from mubkit.storage import get_store

logger = structlog.get_logger()


def register(subparsers):
    parser = subparsers.add_parser(
        "gen",
        help="write the measurement suite for dimension d",
        description="Prime-power d: the d+1 mutually unbiased measurements over F_d. "
                    "Composite d: one product measurement per tuple of per-factor settings.",
    )
    parser.add_argument("--d", type=int, required=True, help="Hilbert space dimension")
    parser.add_argument("--out", type=Path, required=True, help="suite file (.json or .json.gz)")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    suite_file = get_suite_service().build_file(args.d)
    get_store().write(args.out, suite_file)
    print(f"d={suite_file.d} kind={suite_file.kind.value} families={len(suite_file.families)} -> {args.out}")
    return 0
