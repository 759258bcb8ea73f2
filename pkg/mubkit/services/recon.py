"""
Exact State Reconstruction

Prime-power d (d+1 measurements):
    rho = sum_{a, z} (p_{a,z} - 1/(d+1)) P(a, z) = sum_{a, z} p_{a,z} P(a, z) - I
    rho = d^-1 sum_{a, x, y} conj<x, y> p_{a,y} W(a, x) - I

The second form is the Weyl expansion with the d^-1 factor and the -I term
restored; without them the maximally mixed table maps to (d+1) I instead of I/d.

Composite d = d_1 ... d_n (prod (d_i + 1) product measurements):
    S(J) = sum over settings (a_i)_{i in J} and outcomes (y_i)_{i in J} of
           Prob[(y_i)_J | (a_i)_J] * prod_{i in J} ampliated P_i(a_i, y_i),  S(empty) = I
    rho  = sum_{J} (-1)^{n - |J|} S(J)

Composite outcomes are ordered slot-major (the Kronecker order of the factors),
lexicographic within each slot.
"""

from __future__ import annotations

import itertools
import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, PrivateAttr
from scipy import linalg

from mubkit.config import get_settings
from mubkit.domain.models import LabelPayload, ProbabilityTablePayload, SettingProbs
from mubkit.errors import DimensionLimitError, InconsistentTableError, MissingSettingsError, ProbabilityTableError, ShapeError
from mubkit.services.cmat import CMatrix, identity, kron_all
from mubkit.services.gf import FieldSpec, factorize, make_field
from mubkit.services.mub import MeasurementFamily, MubSuite, mub_suite
from mubkit.services.weyl import (
    ExtendedLabel,
    extended_labels,
    label_from_payload,
    label_str,
    label_to_payload,
    weyl_family,
)

logger = structlog.get_logger()

SettingLabel = Union[ExtendedLabel, Tuple[ExtendedLabel, ...]]
# Per-slot entry of a product basis operator: None for the identity, else (a, x)
SlotOperator = Optional[Tuple[ExtendedLabel, Any]]


def setting_name(label: SettingLabel) -> str:
    if isinstance(label, tuple):
        return "(" + ",".join(label_str(a) for a in label) + ")"
    return label_str(label)


# =============================================================================
# Composite systems
# =============================================================================

class CompositeSystem(BaseModel):
    """H = H_1 (x) ... (x) H_n, one prime-power field per factor, ascending prime."""
    fields: List[FieldSpec]

    model_config = ConfigDict(frozen=True)

    _suites: Dict[int, MubSuite] = PrivateAttr(default_factory=dict)
    _weyl: Dict[Tuple[int, str], np.ndarray] = PrivateAttr(default_factory=dict)

    @classmethod
    def from_dimension(cls, d: int) -> "CompositeSystem":
        fac = factorize(d)
        limit = get_settings().MAX_DIM
        if d > limit:
            raise DimensionLimitError(f"d = {d} exceeds the dimension limit {limit}")
        return cls(fields=[make_field(p, m) for p, m in fac.factors])

    @property
    def dims(self) -> List[int]:
        return [f.order for f in self.fields]

    @property
    def d(self) -> int:
        return math.prod(self.dims)

    @property
    def n(self) -> int:
        return len(self.fields)

    def suite(self, slot: int) -> MubSuite:
        if slot not in self._suites:
            self._suites[slot] = mub_suite(self.fields[slot])
        return self._suites[slot]

    def projector(self, slot: int, a: ExtendedLabel, y: int) -> CMatrix:
        return self.suite(slot).family(a).projectors[y]

    def weyl(self, slot: int, a: ExtendedLabel, x_index: int) -> CMatrix:
        key = (slot, label_str(a))
        if key not in self._weyl:
            self._weyl[key] = weyl_family(self.fields[slot], a)
        return self._weyl[key][x_index]


def composite_settings(sys: CompositeSystem) -> List[Tuple[ExtendedLabel, ...]]:
    """All prod (d_i + 1) setting tuples, slot-major lexicographic."""
    return list(itertools.product(*(extended_labels(f) for f in sys.fields)))


def product_family(sys: CompositeSystem, setting: Sequence[ExtendedLabel]) -> MeasurementFamily:
    setting = tuple(setting)
    if len(setting) != sys.n:
        raise ShapeError(f"setting {setting_name(setting)} has {len(setting)} slots, system has {sys.n}")
    per_slot = [sys.suite(i).family(a).projectors for i, a in enumerate(setting)]
    projectors = np.stack([
        kron_all(P[y] for P, y in zip(per_slot, ys))
        for ys in itertools.product(*(range(k) for k in sys.dims))
    ])
    return MeasurementFamily(label=setting, projectors=projectors)


# =============================================================================
# Probability tables
# =============================================================================

class ProbabilityTable(BaseModel):
    """Outcome distributions keyed by setting label, in the family's outcome order."""
    distributions: Dict[Any, np.ndarray]

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @classmethod
    def from_mapping(cls, mapping: Mapping[SettingLabel, Sequence[float]]) -> "ProbabilityTable":
        settings = get_settings()
        out: Dict[Any, np.ndarray] = {}
        for label, probs in mapping.items():
            arr = np.asarray(probs, dtype=np.float64)
            name = setting_name(label)
            if arr.ndim != 1 or arr.size == 0:
                raise ProbabilityTableError(f"setting {name}: expected a flat list of probabilities")
            if np.min(arr) < -settings.PROB_CLIP_TOL:
                raise ProbabilityTableError(f"setting {name}: negative probability {np.min(arr):.3g}")
            total = math.fsum(arr)
            if abs(total - 1.0) > settings.ATOL:
                raise ProbabilityTableError(f"setting {name}: probabilities sum to {total:.12g}")
            if label in out:
                raise ProbabilityTableError(f"setting {name} appears twice")
            out[label] = arr
        return cls(distributions=out)

    def __getitem__(self, label: SettingLabel) -> np.ndarray:
        return self.distributions[label]

    def __contains__(self, label) -> bool:
        return label in self.distributions

    def __len__(self):
        return len(self.distributions)

    def missing_settings(self, required: Iterable[SettingLabel]) -> List[str]:
        return [setting_name(lab) for lab in required if lab not in self.distributions]

    def require(self, required: Sequence[SettingLabel], outcomes: int):
        missing = self.missing_settings(required)
        if missing:
            raise MissingSettingsError(missing)
        extra = [setting_name(lab) for lab in self.distributions if lab not in set(required)]
        if extra:
            raise ProbabilityTableError(f"unknown settings: {', '.join(extra)}")
        for lab in required:
            if self.distributions[lab].size != outcomes:
                raise ProbabilityTableError(
                    f"setting {setting_name(lab)} has {self.distributions[lab].size} outcomes, expected {outcomes}"
                )


def table_from_payload(payload: ProbabilityTablePayload, context: Union[MubSuite, CompositeSystem]) -> ProbabilityTable:
    def parse(obj: LabelPayload) -> SettingLabel:
        if isinstance(context, MubSuite):
            return label_from_payload(context.field, obj)
        if not isinstance(obj, list) or len(obj) != context.n:
            raise ProbabilityTableError(f"composite label {obj!r} must list one label per slot ({context.n})")
        return tuple(label_from_payload(f, part) for f, part in zip(context.fields, obj))

    try:
        mapping = {parse(s.label): s.probs for s in payload.settings}
    except ValueError as e:
        if isinstance(e, ProbabilityTableError):
            raise
        raise ProbabilityTableError(str(e)) from e
    if len(mapping) != len(payload.settings):
        raise ProbabilityTableError("duplicate setting labels")
    return ProbabilityTable.from_mapping(mapping)


def table_to_payload(table: ProbabilityTable) -> ProbabilityTablePayload:
    settings = []
    for label, probs in table.distributions.items():
        obj = [label_to_payload(a) for a in label] if isinstance(label, tuple) else label_to_payload(label)
        settings.append(SettingProbs(label=obj, probs=[float(v) for v in probs]))
    return ProbabilityTablePayload(format_version=get_settings().FORMAT_VERSION, settings=settings)


# =============================================================================
# Prime power
# =============================================================================

def reconstruct_prime_power(probs: ProbabilityTable, suite: MubSuite) -> CMatrix:
    d = suite.d
    probs.require(suite.labels, d)
    terms = np.stack([
        np.einsum("z,zij->ij", probs[fam.label], fam.projectors)
        for fam in suite.families
    ])
    return terms.sum(axis=0) - identity(d)


def reconstruct_weyl(probs: ProbabilityTable, suite: MubSuite) -> CMatrix:
    field, d = suite.field, suite.d
    probs.require(suite.labels, d)
    # Tr rho W(a, x)^dagger = sum_y conj<x, y> p_{a, y}
    conj_b = field.bichar_table.conj()
    terms = np.stack([
        np.einsum("x,xij->ij", conj_b @ probs[fam.label], weyl_family(field, fam.label))
        for fam in suite.families
    ])
    return terms.sum(axis=0) / d - identity(d)


# =============================================================================
# Composite
# =============================================================================

def ampliate(X: CMatrix, slot: int, dims: Sequence[int]) -> CMatrix:
    if not 0 <= slot < len(dims):
        raise ShapeError(f"slot {slot} out of range for {len(dims)} factors")
    if X.shape != (dims[slot], dims[slot]):
        raise ShapeError(f"operator of shape {X.shape} does not act on a factor of dimension {dims[slot]}")
    return kron_all(X if i == slot else identity(k) for i, k in enumerate(dims))


def product_basis_labels(sys: CompositeSystem) -> List[Tuple[SlotOperator, ...]]:
    """Per-slot options: identity, or (a, x index) with x != 0. Identity-everywhere comes first."""
    options = []
    for f in sys.fields:
        slot_opts: List[SlotOperator] = [None]
        slot_opts += [(a, x) for a in extended_labels(f) for x in range(1, f.order)]
        options.append(slot_opts)
    return list(itertools.product(*options))


def _basis_operator(sys: CompositeSystem, ops: Sequence[SlotOperator]) -> CMatrix:
    return kron_all(
        identity(k) if op is None else sys.weyl(i, op[0], op[1])
        for i, (k, op) in enumerate(zip(sys.dims, ops))
    )


def product_basis_F(sys: CompositeSystem) -> List[CMatrix]:
    """The d^2 HS-orthogonal products of ampliated Weyl operators."""
    return [_basis_operator(sys, ops) for ops in product_basis_labels(sys)]


def _require_composite(probs: ProbabilityTable, sys: CompositeSystem) -> List[Tuple[ExtendedLabel, ...]]:
    settings = composite_settings(sys)
    probs.require(settings, sys.d)
    return settings


def restricted_marginals(
    probs: ProbabilityTable,
    sys: CompositeSystem,
    J: Sequence[int],
    strict: bool = True,
) -> Dict[Tuple[ExtendedLabel, ...], np.ndarray]:
    """
    Outcome distribution of the slots in J for each restricted setting (a_i)_{i in J}.

    The marginal should not depend on the settings of the other slots. Exact
    tables satisfy this; empirical ones do not, so the marginals of all settings
    sharing the same restriction are averaged. With strict=True a spread beyond
    MARGINAL_TOL raises InconsistentTableError.
    """
    J = tuple(sorted(J))
    others = tuple(i for i in range(sys.n) if i not in J)
    groups: Dict[Tuple[ExtendedLabel, ...], List[np.ndarray]] = {}
    for setting in composite_settings(sys):
        arr = probs[setting].reshape(sys.dims)
        marg = arr.sum(axis=others) if others else arr
        groups.setdefault(tuple(setting[i] for i in J), []).append(marg)

    tol = get_settings().MARGINAL_TOL
    out = {}
    for key, margs in groups.items():
        stack = np.stack(margs)
        mean = stack.mean(axis=0)
        spread = float(np.max(np.abs(stack - mean))) if stack.size else 0.0
        if spread > tol:
            if strict:
                raise InconsistentTableError(
                    f"marginal of slots {list(J)} under setting {setting_name(key)} varies by {spread:.3g} "
                    f"across the other slots' settings (tolerance {tol:g})"
                )
            logger.debug("Averaging inconsistent marginals", slots=list(J), setting=setting_name(key), spread=spread)
        out[key] = mean
    return out


def s_rho(J: Iterable[int], probs: ProbabilityTable, sys: CompositeSystem, strict: bool = True) -> CMatrix:
    J = tuple(sorted(set(J)))
    if any(not 0 <= i < sys.n for i in J):
        raise ShapeError(f"subset {list(J)} refers to slots outside 0..{sys.n - 1}")
    _require_composite(probs, sys)
    if not J:
        return identity(sys.d)

    margs = restricted_marginals(probs, sys, J, strict)
    terms = []
    for restricted, marg in margs.items():
        setting = dict(zip(J, restricted))
        acc = np.zeros((sys.d, sys.d), dtype=np.complex128)
        for ys in itertools.product(*(range(sys.dims[i]) for i in J)):
            weight = marg[ys]
            if weight == 0.0:
                continue
            outcome = dict(zip(J, ys))
            acc += weight * kron_all(
                sys.projector(i, setting[i], outcome[i]) if i in setting else identity(k)
                for i, k in enumerate(sys.dims)
            )
        terms.append(acc)
    return np.stack(terms).sum(axis=0)


def reconstruct_composite(probs: ProbabilityTable, sys: CompositeSystem, strict: bool = True) -> CMatrix:
    if sys.n == 1:
        _require_composite(probs, sys)
        suite = sys.suite(0)
        single = ProbabilityTable(distributions={setting[0]: dist for setting, dist in probs.distributions.items()})
        return reconstruct_prime_power(single, suite)

    _require_composite(probs, sys)
    terms = []
    for size in range(sys.n + 1):
        sign = (-1) ** (sys.n - size)
        for J in itertools.combinations(range(sys.n), size):
            terms.append(sign * s_rho(J, probs, sys, strict))
    logger.debug("Composite reconstruction", d=sys.d, subsets=len(terms))
    return np.stack(terms).sum(axis=0)


def inclusion_exclusion_coefficient(K: Sequence[int], dims: Sequence[int]) -> int:
    """sum_{L disjoint from K} (-1)^|L| d'(L) d(K) / d, which must equal (-1)^(n - |K|)."""
    K = set(K)
    n = len(dims)
    rest = [i for i in range(n) if i not in K]
    d = math.prod(dims)
    dK = math.prod(dims[i] for i in K)
    total = 0
    for size in range(len(rest) + 1):
        for L in itertools.combinations(rest, size):
            total += (-1) ** size * math.prod(dims[i] + 1 for i in L) * dK
    q, r = divmod(total, d)
    if r:
        raise ArithmeticError(f"coefficient for K={sorted(K)} is not an integer")
    return q


# =============================================================================
# Linear inversion against the product basis
# =============================================================================

def expectation_weyl(
    probs: ProbabilityTable,
    sys: CompositeSystem,
    ops: Sequence[SlotOperator],
    strict: bool = True,
    _cache: Optional[Dict] = None,
) -> complex:
    """Tr rho F^dagger for the product operator F described by `ops`."""
    active = tuple(i for i, op in enumerate(ops) if op is not None)
    if not active:
        return 1.0 + 0j
    if _cache is not None and active in _cache:
        margs = _cache[active]
    else:
        margs = restricted_marginals(probs, sys, active, strict)
        if _cache is not None:
            _cache[active] = margs
    marg = margs[tuple(ops[i][0] for i in active)]
    # W(a, x)^dagger = sum_y conj<x, y> P(a, y) on each active slot
    weights = [sys.fields[i].bichar_table[ops[i][1]].conj() for i in active]
    coeff = weights[0]
    for w in weights[1:]:
        coeff = np.multiply.outer(coeff, w)
    return complex(np.sum(coeff * marg))


def linear_inversion(probs: ProbabilityTable, sys: CompositeSystem, strict: bool = True) -> CMatrix:
    """Solve the Gram system of the product basis for rho; independent of the S(J) sum."""
    _require_composite(probs, sys)
    labels = product_basis_labels(sys)
    basis = np.stack([_basis_operator(sys, ops) for ops in labels])
    cache: Dict = {}
    rhs = np.array([expectation_weyl(probs, sys, ops, strict, cache) for ops in labels])
    flat = basis.reshape(len(labels), -1)
    gram = flat.conj() @ flat.T
    coeffs = linalg.solve(gram, rhs, assume_a="her")
    return np.einsum("k,kij->ij", coeffs, basis)
