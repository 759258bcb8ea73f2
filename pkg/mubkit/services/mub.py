"""
Mutually Unbiased Measurements

Projector families P(a, y) = d^-1 sum_x conj<x, y> W(a, x), the d+1 elementary
measurements M_a = {P(a, y)}, and the strong / weak unbiasedness decisions for
arbitrary pairs of elementary measurements.

For two measurements {P_i}, {Q_j} with L = [Tr (P_i - P_0)(Q_j - Q_0)], i, j >= 1:
- SMUB  iff Tr P_i Q_j = 1/d for all i, j  iff L = 0
- WMUB  iff det(I + J + d^-1 L J L^dagger - L L^dagger) > 0
- ||L|| < 1 is sufficient (not necessary) for WMUB
"""

from __future__ import annotations

import itertools
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict

from mubkit.config import get_settings
from mubkit.errors import FieldMismatchError, InvalidMeasurementError, ShapeError
from mubkit.services.cmat import CMatrix, as_cmatrix, dagger, det_real, identity, op_norm
from mubkit.services.gf import FieldElement, FieldSpec, field_for_dimension
from mubkit.services.weyl import INF, ExtendedLabel, extended_labels, label_str, weyl_family

logger = structlog.get_logger()


# =============================================================================
# Types
# =============================================================================

class MeasurementFamily(BaseModel):
    """
    d rank-one orthogonal projectors summing to the identity.

    `label` is a field label for constructed families, a tuple of labels for
    composite product families, or any name for foreign measurements. The
    projector order is the outcome order; index 0 plays P_0 in the L matrix.
    """
    label: Any
    projectors: np.ndarray                      # shape (d, d, d)
    outcomes: Optional[List[FieldElement]] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def dim(self) -> int:
        return self.projectors.shape[1]

    @property
    def name(self) -> str:
        if isinstance(self.label, tuple):
            return "(" + ",".join(label_str(a) for a in self.label) + ")"
        if isinstance(self.label, FieldElement) or self.label is INF:
            return label_str(self.label)
        return str(self.label)

    def __len__(self):
        return self.projectors.shape[0]


class MubSuite(BaseModel):
    field: FieldSpec
    families: List[MeasurementFamily]

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def d(self) -> int:
        return self.field.order

    @property
    def labels(self) -> List[ExtendedLabel]:
        return [fam.label for fam in self.families]

    def family(self, label: ExtendedLabel) -> MeasurementFamily:
        for fam in self.families:
            if fam.label == label:
                return fam
        raise KeyError(label_str(label))


class SmubReport(BaseModel):
    is_smub: bool
    max_deviation: float


class WmubReport(BaseModel):
    is_wmub: bool
    det_value: float


class NormVerdict(str, Enum):
    SMUB = "SMUB"
    WMUB = "WMUB"
    INCONCLUSIVE = "inconclusive"


# =============================================================================
# Construction
# =============================================================================

def _family_projectors(field: FieldSpec, a: ExtendedLabel) -> np.ndarray:
    Ws = weyl_family(field, a)
    d = field.order
    # P[y] = d^-1 sum_x conj<x, y> W[x]
    return np.einsum("xy,xij->yij", field.bichar_table.conj(), Ws) / d


def projector_P(field: FieldSpec, a: ExtendedLabel, y: FieldElement) -> CMatrix:
    if y.field != field:
        raise FieldMismatchError(f"{y!r} does not belong to {field!r}")
    Ws = weyl_family(field, a)
    weights = field.bichar_table[:, y.index].conj()
    return np.tensordot(weights, Ws, axes=1) / field.order


def measurement_family(field: FieldSpec, a: ExtendedLabel) -> MeasurementFamily:
    return MeasurementFamily(
        label=a,
        projectors=_family_projectors(field, a),
        outcomes=field.elements(),
    )


def mub_suite(field: FieldSpec) -> MubSuite:
    families = [measurement_family(field, a) for a in extended_labels(field)]
    logger.info("Built MUB suite", d=field.order, p=field.p, r=field.r, families=len(families))
    return MubSuite(field=field, families=families)


def mub_suite_for_dimension(d: int) -> MubSuite:
    """Raises UnsupportedDimensionError for composite d."""
    return mub_suite(field_for_dimension(d))


# =============================================================================
# Validation of arbitrary families
# =============================================================================

def validate_family(family: MeasurementFamily, tol: Optional[float] = None) -> MeasurementFamily:
    """Check every elementary-measurement invariant; raise naming the first violated."""
    tol = get_settings().ATOL if tol is None else tol
    P = family.projectors
    name = family.name
    if P.ndim != 3 or P.shape[1] != P.shape[2]:
        raise InvalidMeasurementError("square", f"projector stack has shape {P.shape}", name)
    d = P.shape[1]
    if P.shape[0] != d:
        raise InvalidMeasurementError("cardinality", f"{P.shape[0]} projectors for dimension {d}", name)
    for j, Pj in enumerate(P):
        dev = float(np.max(np.abs(Pj - dagger(Pj))))
        if dev > tol:
            raise InvalidMeasurementError("self-adjoint", f"projector {j} deviates by {dev:.3g}", name)
        dev = float(np.max(np.abs(Pj @ Pj - Pj)))
        if dev > tol:
            raise InvalidMeasurementError("idempotent", f"projector {j} deviates by {dev:.3g}", name)
        tr = np.trace(Pj).real
        if abs(tr - 1.0) > tol:
            raise InvalidMeasurementError("rank one", f"projector {j} has trace {tr:.12g}", name)
    for i, j in itertools.combinations(range(d), 2):
        dev = float(np.max(np.abs(P[i] @ P[j])))
        if dev > tol:
            raise InvalidMeasurementError("orthogonal", f"projectors {i} and {j} overlap by {dev:.3g}", name)
    dev = float(np.max(np.abs(P.sum(axis=0) - identity(d))))
    if dev > tol:
        raise InvalidMeasurementError("resolution of identity", f"sum deviates by {dev:.3g}", name)
    return family


def family_from_matrices(label, projectors: Sequence[CMatrix]) -> MeasurementFamily:
    """Ingest a foreign measurement; input order is the outcome order."""
    if not len(projectors):
        raise InvalidMeasurementError("cardinality", "no projectors given", str(label))
    shapes = {np.shape(m) for m in projectors}
    if len(shapes) != 1:
        raise InvalidMeasurementError("square", f"projectors have mixed shapes {sorted(shapes)}", str(label))
    stack = np.stack([as_cmatrix(m) for m in projectors])
    return validate_family(MeasurementFamily(label=label, projectors=stack))


# =============================================================================
# Unbiasedness
# =============================================================================

def _require_same_dim(m1: MeasurementFamily, m2: MeasurementFamily):
    if m1.projectors.shape != m2.projectors.shape:
        raise ShapeError(
            f"families {m1.name} and {m2.name} have shapes {m1.projectors.shape} and {m2.projectors.shape}"
        )


def overlap_table(m1: MeasurementFamily, m2: MeasurementFamily) -> np.ndarray:
    """T[i, j] = Tr P_i Q_j (real)."""
    _require_same_dim(m1, m2)
    T = np.einsum("iab,jba->ij", m1.projectors, m2.projectors)
    return T.real


def check_smub(m1: MeasurementFamily, m2: MeasurementFamily) -> SmubReport:
    d = m1.dim
    T = overlap_table(m1, m2)
    dev = float(np.max(np.abs(T - 1.0 / d)))
    return SmubReport(is_smub=dev <= get_settings().ATOL, max_deviation=dev)


def overlap_L(m1: MeasurementFamily, m2: MeasurementFamily) -> np.ndarray:
    """L[i-1, j-1] = Tr (P_i - P_0)(Q_j - Q_0), i, j = 1 .. d-1."""
    _require_same_dim(m1, m2)
    T = np.einsum("iab,jba->ij", m1.projectors, m2.projectors)
    if np.max(np.abs(T.imag)) > get_settings().ATOL:
        logger.warning("Overlap table has non-negligible imaginary part", max_imag=float(np.max(np.abs(T.imag))))
    T = T.real
    return T[1:, 1:] - T[1:, :1] - T[:1, 1:] + T[0, 0]


def _ones(n: int) -> np.ndarray:
    return np.ones((n, n))


def wmub_matrix(L: np.ndarray, d: int) -> np.ndarray:
    """I + J + d^-1 L J L^dagger - L L^dagger on (d-1) x (d-1)."""
    n = d - 1
    I, J = np.eye(n), _ones(n)
    Ld = L.conj().T
    return I + J + (L @ J @ Ld) / d - L @ Ld


def schur_matrix(L: np.ndarray, d: int) -> np.ndarray:
    """I + J - L (I + J)^-1 L^dagger, the Schur complement of the Gram matrix."""
    n = d - 1
    G = np.eye(n) + _ones(n)
    return G - L @ np.linalg.solve(G, L.conj().T)


def check_wmub_det(m1: MeasurementFamily, m2: MeasurementFamily) -> WmubReport:
    L = overlap_L(m1, m2)
    value = det_real(wmub_matrix(L, m1.dim))
    return WmubReport(is_wmub=value > get_settings().WMUB_DET_TOL, det_value=value)


def check_wmub_norm(m1: MeasurementFamily, m2: MeasurementFamily) -> NormVerdict:
    norm = op_norm(overlap_L(m1, m2))
    if norm <= get_settings().ATOL:
        return NormVerdict.SMUB
    if norm < 1.0:
        return NormVerdict.WMUB
    return NormVerdict.INCONCLUSIVE


def wmub_oracle(m1: MeasurementFamily, m2: MeasurementFamily) -> bool:
    """
    A(M) n A(M') = C I decided directly: the 2(d-1) operators
    {P_i - P_0} u {Q_j - Q_0} must be linearly independent in B(H).
    """
    _require_same_dim(m1, m2)
    P, Q = m1.projectors, m2.projectors
    diffs = np.concatenate([P[1:] - P[:1], Q[1:] - Q[:1]])
    V = diffs.reshape(diffs.shape[0], -1)
    gram = V.conj() @ V.T
    sv = np.linalg.svd(gram, compute_uv=False)
    rank = int(np.sum(sv > get_settings().RANK_TOL))
    return rank == diffs.shape[0]


# =============================================================================
# Batch report
# =============================================================================

class CheckMode(str, Enum):
    SMUB = "smub"
    WMUB = "wmub"
    ALL = "all"


def pairwise_checks(families: Sequence[MeasurementFamily], mode: CheckMode = CheckMode.ALL) -> pd.DataFrame:
    """One row per unordered pair with the verdicts `mode` asks for and an overall `passed`."""
    rows: List[Dict] = []
    for m1, m2 in itertools.combinations(families, 2):
        row: Dict = {"first": m1.name, "second": m2.name}
        passed = True
        if mode in (CheckMode.SMUB, CheckMode.ALL):
            smub = check_smub(m1, m2)
            row["smub"] = smub.is_smub
            row["max_deviation"] = smub.max_deviation
            passed &= smub.is_smub
        if mode in (CheckMode.WMUB, CheckMode.ALL):
            wmub = check_wmub_det(m1, m2)
            row["wmub"] = wmub.is_wmub
            row["det_value"] = wmub.det_value
            row["norm_test"] = check_wmub_norm(m1, m2).value
            passed &= wmub.is_wmub
        row["passed"] = bool(passed)
        rows.append(row)
    columns = ["first", "second", "smub", "max_deviation", "wmub", "det_value", "norm_test", "passed"]
    frame = pd.DataFrame(rows)
    return frame[[c for c in columns if c in frame.columns]] if rows else pd.DataFrame(columns=columns)
