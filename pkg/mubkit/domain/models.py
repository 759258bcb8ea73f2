"""
File payload models

Wire forms for everything mubkit reads or writes. These carry plain JSON types
only; the services convert them to and from numpy matrices and field elements.
"""

from pydantic import BaseModel, Field, ConfigDict, model_validator
from typing import List, Optional, Tuple, Union
from enum import Enum


# A label is "inf", a coefficient list (constant term first), an opaque name,
# or, for composite settings, a list of per-slot labels.
LabelPayload = Union[str, List[int], List[Union[str, List[int]]]]


class MatrixPayload(BaseModel):
    """Row-major complex matrix, entries as [re, im] pairs."""
    rows: int
    cols: int
    entries: List[Tuple[float, float]]

    @model_validator(mode="after")
    def _check_length(self):
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(
                f"matrix has {len(self.entries)} entries, expected {self.rows}x{self.cols}"
            )
        return self


class FieldSpecPayload(BaseModel):
    p: int
    r: int
    modulus: List[int]


class FamilyPayload(BaseModel):
    label: LabelPayload
    projectors: List[MatrixPayload]


class SuiteKind(str, Enum):
    PRIME_POWER = "prime_power"
    COMPOSITE = "composite"
    CUSTOM = "custom"       # user-supplied families, no field construction


class SuiteFile(BaseModel):
    """
    Output of `gen`, input of `verify` and the --system of `reconstruct`.

    Prime-power suites carry one field and d+1 families; composite suites carry
    one field per prime-power factor and one product family per setting tuple.
    """
    format_version: str
    kind: SuiteKind
    d: int
    fields: List[FieldSpecPayload] = Field(default_factory=list)
    families: List[FamilyPayload] = Field(default_factory=list)

    model_config = ConfigDict(use_enum_values=False)


class SettingProbs(BaseModel):
    label: LabelPayload
    probs: List[float]


class ProbabilityTablePayload(BaseModel):
    format_version: Optional[str] = None
    settings: List[SettingProbs]


class StateFile(BaseModel):
    """Output of `reconstruct`; also accepted as the --state of `tomo`."""
    format_version: str
    d: int
    state: MatrixPayload
    raw: Optional[MatrixPayload] = None
    trace: Optional[float] = None
    min_eigenvalue: Optional[float] = None
    degenerate: bool = False
    trace_distance: Optional[float] = None
