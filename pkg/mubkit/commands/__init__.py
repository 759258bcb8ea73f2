"""
mubkit subcommands
"""

from . import gen
from . import verify
from . import reconstruct
from . import tomo
from . import selftest

__all__ = ["gen", "verify", "reconstruct", "tomo", "selftest"]
