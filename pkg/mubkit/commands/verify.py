import argparse
from pathlib import Path

import pandas as pd
import structlog

from mubkit.domain.models import SuiteFile
from mubkit.errors import CheckFailedError, InputFileError
from mubkit.services.mub import CheckMode, pairwise_checks
from mubkit.services.suite import get_suite_service
from mubkit.storage import get_store

logger = structlog.get_logger()


def register(subparsers):
    parser = subparsers.add_parser(
        "verify",
        help="check pairwise unbiasedness of the families in a suite file",
    )
    parser.add_argument("--in", dest="in_path", type=Path, required=True, help="suite or pair file")
    parser.add_argument("--mode", choices=[m.value for m in CheckMode], default=CheckMode.ALL.value)
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    suite_file = get_store().read(args.in_path, SuiteFile)
    families = get_suite_service().families_from_file(suite_file)
    if len(families) < 2:
        raise InputFileError(f"{args.in_path} holds {len(families)} families; need at least two to compare")

    frame = pairwise_checks(families, CheckMode(args.mode))
    with pd.option_context("display.max_rows", None, "display.width", 200):
        print(frame.to_string(index=False))

    failed = int((~frame["passed"]).sum())
    print(f"{len(frame)} pairs, {failed} failed ({args.mode})")
    logger.info("Verified suite", path=str(args.in_path), pairs=len(frame), failed=failed)
    if failed:
        raise CheckFailedError(f"{failed} of {len(frame)} pairs failed the {args.mode} checks")
    return 0
