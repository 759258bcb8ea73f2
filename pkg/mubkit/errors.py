"""
mubkit error hierarchy

Every error carries the CLI exit code it maps to:
- 2 for usage / input problems (bad dimension, malformed file, invalid family)
- 1 for a check that ran and failed
"""

from typing import List, Optional


class MubkitError(Exception):
    """Base class for all mubkit errors"""
    exit_code: int = 2


class InvalidDimensionError(MubkitError, ValueError):
    """Dimension below 2 or otherwise unusable"""


class InvalidPrimeError(MubkitError, ValueError):
    """Characteristic is not prime"""


class DimensionLimitError(MubkitError, ValueError):
    """p^r exceeds the configured MAX_DIM"""


class UnsupportedDimensionError(MubkitError, ValueError):
    """Prime-power construction requested for a composite dimension"""


class FieldMismatchError(MubkitError, ValueError):
    """Operands belong to different finite fields"""


class FieldDivisionError(MubkitError, ZeroDivisionError):
    """Inverse of the zero element"""


class ShapeError(MubkitError, ValueError):
    """Matrix dimensions do not match, or a Hermitian input is not Hermitian"""


class InvalidMeasurementError(MubkitError, ValueError):
    """A measurement family violates one of its invariants"""

    def __init__(self, invariant: str, detail: str, label: Optional[str] = None):
        self.invariant = invariant
        self.detail = detail
        self.label = label
        where = f" in family {label}" if label is not None else ""
        super().__init__(f"invariant '{invariant}' violated{where}: {detail}")


class ProbabilityTableError(MubkitError, ValueError):
    """Probability table is malformed"""


class MissingSettingsError(ProbabilityTableError):
    """Probability table does not cover every required setting"""

    def __init__(self, missing: List[str]):
        self.missing = missing
        super().__init__(f"missing settings: {', '.join(missing)}")


class InconsistentTableError(ProbabilityTableError):
    """Slot marginals disagree across the ignored settings"""


class InputFileError(MubkitError, ValueError):
    """A file could not be read or decoded"""


class CheckFailedError(MubkitError):
    """A verification ran to completion and did not pass"""
    exit_code = 1
