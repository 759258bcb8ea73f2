import argparse
import sys
from typing import List, Optional

import structlog
from pydantic import ValidationError

from mubkit.config import get_settings
from mubkit.errors import MubkitError
from mubkit.logging_config import configure_logging

logger = structlog.get_logger()


def create_parser() -> argparse.ArgumentParser:
    settings = get_settings()

    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Mutually unbiased measurements over finite fields: generate, verify, reconstruct, simulate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    from mubkit.commands import gen, reconstruct, selftest, tomo, verify

    gen.register(subparsers)
    verify.register(subparsers)
    reconstruct.register(subparsers)
    tomo.register(subparsers)
    selftest.register(subparsers)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    configure_logging(command=args.command)
    logger.debug("Running command")
    try:
        return args.handler(args)
    except MubkitError as e:
        logger.debug("Command failed", error=type(e).__name__)
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        first = e.errors()[0]
        print(f"{parser.prog} {args.command}: error: {first['msg']}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
