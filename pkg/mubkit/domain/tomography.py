from pydantic import BaseModel, Field
from typing import Dict, List, Optional, Union
from enum import Enum

from mubkit.domain.models import LabelPayload, MatrixPayload


class RepairMethod(str, Enum):
    POSITIVE_PART = "positive_part"     # clamp negative eigenvalues, renormalise
    MODULUS = "modulus"                 # |A| / Tr |A|
    PROJECTION = "projection"           # closest unit-trace PSD matrix in 2-norm


class ShotConfig(BaseModel):
    """Equal shot allocation across settings; the seed fixes every draw."""
    shots_per_setting: int = Field(ge=1)
    seed: int = Field(ge=0, le=2**64 - 1)
    trials: int = Field(default=1, ge=1)
    # Feed exact probabilities x shots instead of sampled counts
    exact: bool = False
    repair: RepairMethod = RepairMethod.POSITIVE_PART


class Metrics(BaseModel):
    trace_distance: float
    hs_error: float
    fidelity: Optional[float] = None    # undefined for indefinite estimates


class SettingCounts(BaseModel):
    label: LabelPayload
    counts: List[Union[int, float]]


class TrialResult(BaseModel):
    trial: int
    counts: List[SettingCounts]
    raw_min_eigenvalue: float
    degenerate: bool = False
    raw_estimate: Optional[MatrixPayload] = None
    repaired_estimate: Optional[MatrixPayload] = None
    raw_metrics: Optional[Metrics] = None
    metrics: Optional[Metrics] = None


class TomographyReport(BaseModel):
    format_version: str
    d: int
    config: ShotConfig
    true_state: Optional[MatrixPayload] = None
    trials: List[TrialResult] = Field(default_factory=list)
    # Medians over trials
    summary: Dict[str, float] = Field(default_factory=dict)


class SweepRow(BaseModel):
    shots: int
    trials: int
    median_trace_distance: float
    median_fidelity: float
    median_hs_error: float


class SweepReport(BaseModel):
    format_version: str
    d: int
    seed: int
    repair: RepairMethod
    rows: List[SweepRow]
    # log(median trace distance) against log(shots)
    slope: Optional[float] = None
