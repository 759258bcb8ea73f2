"""
Weyl Operators over F_d

U_a |x> = |a + x>, V_b |x> = <b, x> |x>, and the labelled unitaries

    W(a, x) = alpha(a, x) U_x V_{ax}   for a in F_d
    W(inf, x) = V_x

which satisfy W(a, x) W(a, y) = W(a, x + y) for every a in F_d u {inf}.

Basis vectors |x> follow the canonical element order of the field.

Phase alpha(a, x) = chi(a z(x)) with
    z(x) = sum_{i<j} s_i s_j e_i e_j + sum_j s_j (s_j - 1)/2 e_j^2
is well defined for odd p. In characteristic 2 the halving is meaningless mod 2
and the group law fails with it ((U_1 V_1)^2 = -I at d = 2), so there the phase
is built from fourth roots of unity:
    alpha(a, x) = prod_j gamma_j(a)^{s_j} * prod_{i<j} chi(a e_i e_j)^{s_i s_j}
with gamma_j(a) in {1, i} a square root of chi(a e_j^2). Setting
PHASE_PATCH=false restores the printed formula (used to prove the guard works).
"""

from __future__ import annotations

from enum import Enum
from typing import Any, List, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from mubkit.config import get_settings
from mubkit.domain.models import LabelPayload
from mubkit.errors import FieldMismatchError
from mubkit.services.cmat import CMatrix, matrix_to_payload
from mubkit.services.gf import FieldElement, FieldSpec

logger = structlog.get_logger()


class Infinity(str, Enum):
    """The extra label of F_d u {inf}."""
    INF = "inf"


INF = Infinity.INF

# a in F_d u {inf}
ExtendedLabel = Union[FieldElement, Infinity]


def extended_labels(field: FieldSpec) -> List[ExtendedLabel]:
    """Field elements in canonical order, then inf."""
    return [*field.elements(), INF]


def label_to_payload(label: ExtendedLabel) -> LabelPayload:
    if label is INF:
        return INF.value
    return list(label.coeffs)


def label_from_payload(field: FieldSpec, obj: LabelPayload) -> ExtendedLabel:
    if obj == INF.value:
        return INF
    if isinstance(obj, list) and all(isinstance(c, int) for c in obj):
        if len(obj) != field.r or any(not 0 <= c < field.p for c in obj):
            raise ValueError(f"label {obj} is not an element of F_{field.order}")
        return field.element(obj)
    raise ValueError(f"cannot read {obj!r} as a label of F_{field.order}")


def label_str(label: ExtendedLabel) -> str:
    return "inf" if label is INF else str(label)


def _require(field: FieldSpec, *xs: FieldElement):
    for x in xs:
        if x.field != field:
            raise FieldMismatchError(f"{x!r} does not belong to {field!r}")


# =============================================================================
# U, V and the phase
# =============================================================================

def shift_U(field: FieldSpec, a: FieldElement) -> CMatrix:
    _require(field, a)
    q = field.order
    mat = np.zeros((q, q), dtype=np.complex128)
    mat[field.add_table[a.index], np.arange(q)] = 1.0
    return mat


def clock_V(field: FieldSpec, b: FieldElement) -> CMatrix:
    _require(field, b)
    return np.diag(field.bichar_table[b.index]).astype(np.complex128)


def _phase_exponent_char2(field: FieldSpec, a: FieldElement, x: FieldElement) -> int:
    """alpha(a, x) = i^k in characteristic 2; returns k mod 4."""
    B = field.product_coords
    a_idx = a.index
    chi = field.chi_table
    k = 0
    s = x.coeffs
    for j in range(field.r):
        if s[j]:
            # gamma_j(a) = i exactly when chi(a e_j^2) = -1
            if chi[field.mul_table[a_idx, field._indices_of(B[j, j])]].real < 0:
                k += 1
    for i in range(field.r):
        for j in range(i + 1, field.r):
            if s[i] and s[j]:
                if chi[field.mul_table[a_idx, field._indices_of(B[i, j])]].real < 0:
                    k += 2
    return k % 4


def alpha(field: FieldSpec, a: FieldElement, x: FieldElement) -> complex:
    _require(field, a, x)
    if field.p == 2 and get_settings().PHASE_PATCH:
        return complex(1j ** _phase_exponent_char2(field, a, x))
    p = field.p
    B = field.product_coords
    s = x.coeffs
    z = np.zeros(field.r, dtype=np.int64)
    for i in range(field.r):
        for j in range(i + 1, field.r):
            z += s[i] * s[j] * B[i, j]
        # s(s-1) is even, so the integer halving is exact before reduction
        z += (s[i] * (s[i] - 1) // 2) * B[i, i]
    z_idx = int(field._indices_of(z % p))
    return complex(field.chi_table[field.mul_table[a.index, z_idx]])


# =============================================================================
# Labelled operators
# =============================================================================

class WeylOperator(BaseModel):
    a: Any                  # ExtendedLabel, kept as given
    x: FieldElement
    mat: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def weyl_W(field: FieldSpec, a: ExtendedLabel, x: FieldElement) -> WeylOperator:
    _require(field, x)
    if a is INF:
        mat = clock_V(field, x)
    else:
        _require(field, a)
        mat = alpha(field, a, x) * (shift_U(field, x) @ clock_V(field, a * x))
    return WeylOperator(a=a, x=x, mat=mat)


def weyl_family(field: FieldSpec, a: ExtendedLabel) -> np.ndarray:
    """Stack of W(a, x) for x in canonical order, shape (d, d, d)."""
    return np.stack([weyl_W(field, a, x).mat for x in field.elements()])


def error_basis(field: FieldSpec) -> List[WeylOperator]:
    """{I} u {W(a, x) : a in F_d u {inf}, x != 0}, d^2 operators."""
    basis = [weyl_W(field, INF, field.zero)]
    for a in extended_labels(field):
        for x in field.elements()[1:]:
            basis.append(weyl_W(field, a, x))
    logger.debug("Built Weyl error basis", d=field.order, size=len(basis))
    return basis


def weyl_to_payload(op: WeylOperator) -> dict:
    return {
        "a": label_to_payload(op.a),
        "x": list(op.x.coeffs),
        "matrix": matrix_to_payload(op.mat).model_dump(),
    }
