"""
Dense complex matrices and the Hilbert-Schmidt geometry <X|Y> = Tr X^dagger Y.

Matrices are plain complex128 numpy arrays; this module adds the checks and the
canonicalisation conventions the rest of the package relies on.
"""

from __future__ import annotations

import functools
from typing import Iterable, Tuple

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import linalg

from mubkit.config import get_settings
from mubkit.domain.models import MatrixPayload
from mubkit.errors import ShapeError

logger = structlog.get_logger()

CMatrix = npt.NDArray[np.complex128]


def as_cmatrix(data) -> CMatrix:
    m = np.asarray(data, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def identity(d: int) -> CMatrix:
    return np.eye(d, dtype=np.complex128)


def dagger(a: CMatrix) -> CMatrix:
    return a.conj().T


def _require_same_square(x: CMatrix, y: CMatrix):
    if x.shape != y.shape or x.shape[0] != x.shape[1]:
        raise ShapeError(f"need equal square shapes, got {x.shape} and {y.shape}")


def hs_inner(x: CMatrix, y: CMatrix) -> complex:
    """Tr X^dagger Y; antilinear in X, linear in Y."""
    _require_same_square(x, y)
    return complex(np.vdot(x, y))


def kron(a: CMatrix, b: CMatrix) -> CMatrix:
    return np.kron(a, b)


def kron_all(mats: Iterable[CMatrix]) -> CMatrix:
    return functools.reduce(np.kron, mats)


def hermitian_deviation(a: CMatrix) -> float:
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"need a square matrix, got {a.shape}")
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def is_hermitian(a: CMatrix, tol: float | None = None) -> bool:
    tol = get_settings().HERMITIAN_TOL if tol is None else tol
    return hermitian_deviation(a) <= tol


def herm_eig(a: CMatrix, tol: float | None = None) -> Tuple[np.ndarray, CMatrix]:
    """
    Eigendecomposition of a Hermitian matrix.

    Eigenvalues come back in descending order. Each eigenvector is rotated so its
    first component of non-negligible magnitude is positive real.
    """
    a = as_cmatrix(a)
    tol = get_settings().HERMITIAN_TOL if tol is None else tol
    dev = hermitian_deviation(a)
    if dev > tol:
        raise ShapeError(f"matrix is not Hermitian (max deviation {dev:.3g} > {tol:.3g})")
    vals, vecs = linalg.eigh((a + dagger(a)) / 2)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size:
            z = col[lead[0]]
            vecs[:, k] = col * (abs(z) / z)
    return vals, vecs


def op_norm(a: CMatrix) -> float:
    """Largest singular value."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def det_real(a: CMatrix) -> float:
    """Determinant with the (round-off) imaginary part dropped."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"need a square matrix, got {a.shape}")
    value = complex(np.linalg.det(a))
    if abs(value.imag) > get_settings().ATOL and is_hermitian(a.astype(np.complex128)):
        logger.warning("Determinant of Hermitian input has imaginary part", imag=value.imag)
    return value.real


def psd_sqrt(a: CMatrix) -> CMatrix:
    """Square root through the spectral map, negative eigenvalues clamped."""
    vals, vecs = linalg.eigh((a + dagger(a)) / 2)
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ dagger(vecs)


# =============================================================================
# Wire form
# =============================================================================

def matrix_to_payload(m: CMatrix) -> MatrixPayload:
    m = as_cmatrix(m)
    flat = m.reshape(-1)
    return MatrixPayload(
        rows=m.shape[0],
        cols=m.shape[1],
        entries=[(float(z.real), float(z.imag)) for z in flat],
    )


def matrix_from_payload(payload: MatrixPayload) -> CMatrix:
    arr = np.array(payload.entries, dtype=np.float64).reshape(payload.rows * payload.cols, 2)
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(payload.rows, payload.cols)


# =============================================================================
# States
# =============================================================================

def density_violations(m: CMatrix) -> list[str]:
    """Names of the state invariants m violates (empty when m is a state)."""
    settings = get_settings()
    problems = []
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return [f"square: shape {m.shape}"]
    dev = hermitian_deviation(m)
    if dev > settings.HERMITIAN_TOL:
        problems.append(f"hermitian: max deviation {dev:.3g}")
        return problems
    tr = np.trace(m).real
    if abs(tr - 1.0) > settings.HERMITIAN_TOL:
        problems.append(f"unit trace: trace {tr:.12g}")
    low = float(np.min(linalg.eigvalsh((m + dagger(m)) / 2)))
    if low < -settings.POSITIVITY_TOL:
        problems.append(f"nonnegative: minimum eigenvalue {low:.3g}")
    return problems


class DensityMatrix(BaseModel):
    """Nonnegative Hermitian matrix of unit trace."""
    mat: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _check_state(self):
        problems = density_violations(as_cmatrix(self.mat))
        if problems:
            raise ValueError("not a density matrix: " + "; ".join(problems))
        return self

    @property
    def dim(self) -> int:
        return self.mat.shape[0]
