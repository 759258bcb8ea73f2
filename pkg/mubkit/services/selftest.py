"""
Invariant suite behind `mubkit selftest`.

Each check maps a dimension to a deviation (0 is exact) or None when it does
not apply there. A check passes when the deviation is within its tolerance.
Checks run in order per dimension, dimensions ascending, so the first failure
reported is the most elementary broken identity.
"""

import itertools
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel

from mubkit.config import get_settings
from mubkit.services.cmat import identity
from mubkit.services.gf import FieldSpec, factorize
from mubkit.services.mub import MubSuite, overlap_L, overlap_table, wmub_matrix
from mubkit.services.recon import (
    ProbabilityTable,
    composite_settings,
    inclusion_exclusion_coefficient,
    product_basis_F,
    product_family,
    reconstruct_composite,
    reconstruct_prime_power,
    reconstruct_weyl,
)
from mubkit.services.suite import get_suite_service
from mubkit.services.tomo import born_probs, random_state, trace_distance
from mubkit.services.weyl import clock_V, error_basis, extended_labels, shift_U, weyl_family

logger = structlog.get_logger()

SELFTEST_SEED = 20240229


class Check(BaseModel):
    name: str
    source: str
    identity: str
    tolerance: float
    run: Callable[[int, np.random.Generator], Optional[float]]


class Failure(BaseModel):
    check: str
    d: int
    deviation: float
    identity: str


class SelftestResult(BaseModel):
    table: Dict[str, Dict[int, str]]
    failures: List[Failure]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def first_failure(self) -> Optional[Failure]:
        return self.failures[0] if self.failures else None

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.table).T


def _field(d: int) -> Optional[FieldSpec]:
    fac = factorize(d)
    if not fac.is_prime_power:
        return None
    ctx = get_suite_service().context_for_dimension(d)
    return ctx.field


def _suite(d: int) -> Optional[MubSuite]:
    field = _field(d)
    return None if field is None else get_suite_service().suite(field)


# =============================================================================
# Checks
# =============================================================================

def check_field_axioms(d, rng):
    field = _field(d)
    if field is None:
        return None
    add, mul, q = field.add_table, field.mul_table, field.order
    bad = 0
    for x in range(q):
        # (xy)z = x(yz) and x(y + z) = xy + xz
        bad += int(np.any(mul[mul[x], :] != mul[x][mul]))
        bad += int(np.any(mul[x][add] != add[mul[x]][:, mul[x]]))
        if x and sorted(mul[x]) != list(range(q)):
            bad += 1
    return float(bad)


def check_character_sum(d, rng):
    field = _field(d)
    if field is None:
        return None
    sums = field.bichar_table.sum(axis=1)
    expected = np.zeros(d)
    expected[0] = d
    return float(np.max(np.abs(sums - expected)))


def check_commutation(d, rng):
    field = _field(d)
    if field is None:
        return None
    dev = 0.0
    for a, b in itertools.product(field.elements(), repeat=2):
        U, V = shift_U(field, a), clock_V(field, b)
        dev = max(dev, float(np.max(np.abs(V @ U - field.bichar_table[a.index, b.index] * U @ V))))
    return dev


def check_weyl_orthogonality(d, rng):
    field = _field(d)
    if field is None:
        return None
    basis = np.stack([op.mat for op in error_basis(field)])
    flat = basis.reshape(len(basis), -1)
    gram = flat.conj() @ flat.T
    return float(np.max(np.abs(gram - d * np.eye(len(basis)))))


def check_group_law(d, rng):
    field = _field(d)
    if field is None:
        return None
    add = field.add_table
    dev = 0.0
    for a in extended_labels(field):
        Ws = weyl_family(field, a)
        prods = np.einsum("xij,yjk->xyik", Ws, Ws)
        dev = max(dev, float(np.max(np.abs(prods - Ws[add]))))
    return dev


def check_projector_families(d, rng):
    suite = _suite(d)
    if suite is None:
        return None
    dev = 0.0
    for fam in suite.families:
        P = fam.projectors
        dev = max(dev, float(np.max(np.abs(np.einsum("zij,zjk->zik", P, P) - P))))
        dev = max(dev, float(np.max(np.abs(P - P.conj().transpose(0, 2, 1)))))
        dev = max(dev, float(np.max(np.abs(P.sum(axis=0) - identity(d)))))
        dev = max(dev, float(np.max(np.abs(np.trace(P, axis1=1, axis2=2) - 1))))
    return dev


def check_resolution_sum(d, rng):
    suite = _suite(d)
    if suite is None:
        return None
    total = sum(fam.projectors.sum(axis=0) for fam in suite.families)
    return float(np.max(np.abs(total - (d + 1) * identity(d))))


def check_smub_overlap(d, rng):
    suite = _suite(d)
    if suite is None:
        return None
    dev = 0.0
    for m1, m2 in itertools.combinations(suite.families, 2):
        dev = max(dev, float(np.max(np.abs(overlap_table(m1, m2) - 1.0 / d))))
    return dev


def check_wmub_smub_pairs(d, rng):
    """L vanishes and the weak-unbiasedness determinant is positive for every pair."""
    suite = _suite(d)
    if suite is None:
        return None
    dev = 0.0
    for m1, m2 in itertools.combinations(suite.families, 2):
        L = overlap_L(m1, m2)
        dev = max(dev, float(np.max(np.abs(L))) if L.size else 0.0)
        if np.linalg.det(wmub_matrix(L, d)).real <= get_settings().WMUB_DET_TOL:
            dev = max(dev, 1.0)
    return dev


def _exact_table(rho, suite: MubSuite) -> ProbabilityTable:
    return ProbabilityTable.from_mapping({fam.label: born_probs(rho, fam) for fam in suite.families})


def check_reconstruction(d, rng):
    suite = _suite(d)
    if suite is None:
        return None
    dev = 0.0
    for _ in range(5):
        rho = random_state(d, rng).mat
        table = _exact_table(rho, suite)
        first = reconstruct_prime_power(table, suite)
        second = reconstruct_weyl(table, suite)
        dev = max(dev, trace_distance(first, rho), float(np.max(np.abs(first - second))))
    return dev


def check_composite_reconstruction(d, rng):
    system = get_suite_service().system(d)
    rho = random_state(d, rng).mat
    table = ProbabilityTable.from_mapping({
        s: born_probs(rho, product_family(system, s)) for s in composite_settings(system)
    })
    dev = trace_distance(reconstruct_composite(table, system), rho)
    if system.n == 1:
        suite = system.suite(0)
        single = _exact_table(rho, suite)
        dev = max(dev, float(np.max(np.abs(reconstruct_composite(table, system) - reconstruct_prime_power(single, suite)))))
    return dev


def check_product_basis(d, rng):
    system = get_suite_service().system(d)
    if system.n == 1:
        return None
    basis = np.stack(product_basis_F(system))
    if len(basis) != d * d:
        return float(abs(len(basis) - d * d))
    flat = basis.reshape(len(basis), -1)
    return float(np.max(np.abs(flat.conj() @ flat.T - d * np.eye(d * d))))


def check_inclusion_exclusion(d, rng):
    dims = factorize(d).dims
    n = len(dims)
    bad = 0
    for size in range(n + 1):
        for K in itertools.combinations(range(n), size):
            if inclusion_exclusion_coefficient(K, dims) != (-1) ** (n - size):
                bad += 1
    return float(bad)


CHECKS: List[Check] = [
    Check(name="field_axioms", source="finite field construction",
          identity="F_d is a field: (xy)z = x(yz), x(y+z) = xy + xz, x != 0 invertible",
          tolerance=0.0, run=check_field_axioms),
    Check(name="character_sum", source="character orthogonality",
          identity="sum_y <x,y> = d delta_{x,0}", tolerance=1e-9, run=check_character_sum),
    Check(name="commutation", source="Weyl commutation relation",
          identity="V_b U_a = <a,b> U_a V_b", tolerance=1e-9, run=check_commutation),
    Check(name="weyl_orthogonality", source="Weyl operators form an orthogonal basis",
          identity="Tr W(a,x)^dagger W(b,y) = d delta, d^2 operators",
          tolerance=1e-9, run=check_weyl_orthogonality),
    Check(name="group_law", source="Weyl group law, characteristic-2 phase",
          identity="W(a,x) W(a,y) = W(a,x+y) for a in F_d u {inf}",
          tolerance=1e-9, run=check_group_law),
    Check(name="projector_families", source="Weyl families as elementary measurements",
          identity="P(a,y) rank-one orthogonal projectors, sum_y P(a,y) = I",
          tolerance=1e-9, run=check_projector_families),
    Check(name="resolution_sum", source="resolution of (d+1) I by the d+1 families",
          identity="sum_{a,z} P(a,z) = (d+1) I", tolerance=1e-9, run=check_resolution_sum),
    Check(name="smub_overlap", source="strong unbiasedness of the Weyl families",
          identity="Tr P(a,x) P(b,y) = 1/d for a != b", tolerance=1e-9, run=check_smub_overlap),
    Check(name="wmub_smub_pairs", source="determinant criterion for weak unbiasedness",
          identity="L = 0 and det(I + J + LJL^dagger/d - LL^dagger) > 0 for SMUB pairs",
          tolerance=1e-9, run=check_wmub_smub_pairs),
    Check(name="reconstruction", source="prime-power reconstruction formula",
          identity="rho = sum p P - I = d^-1 sum conj<x,y> p W - I",
          tolerance=1e-8, run=check_reconstruction),
    Check(name="composite_reconstruction", source="composite reconstruction by inclusion-exclusion",
          identity="rho = sum_J (-1)^(n-|J|) S(J)",
          tolerance=1e-8, run=check_composite_reconstruction),
    Check(name="product_basis", source="ampliated product basis",
          identity="ampliated Weyl products: d^2 operators with Gram matrix d I",
          tolerance=1e-9, run=check_product_basis),
    Check(name="inclusion_exclusion", source="inclusion-exclusion coefficient identity",
          identity="sum_{L n K = 0} (-1)^|L| d'(L) d(K)/d = (-1)^(n-|K|)",
          tolerance=0.0, run=check_inclusion_exclusion),
]


def quote_map() -> Dict[str, str]:
    return {c.name: f"{c.source}: {c.identity}" for c in CHECKS}


def run_selftest(max_d: int, seed: int = SELFTEST_SEED) -> SelftestResult:
    dims = list(range(2, max_d + 1))
    table: Dict[str, Dict[int, str]] = {c.name: {} for c in CHECKS}
    failures: List[Failure] = []
    for d in dims:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(d,))))
        for check in CHECKS:
            deviation = check.run(d, rng)
            if deviation is None:
                table[check.name][d] = "-"
                continue
            ok = deviation <= check.tolerance
            table[check.name][d] = "pass" if ok else "FAIL"
            if not ok:
                failures.append(Failure(check=check.name, d=d, deviation=deviation, identity=check.identity))
                logger.warning("Selftest check failed", check=check.name, d=d, deviation=deviation)
    logger.info("Selftest finished", max_d=max_d, failures=len(failures))
    return SelftestResult(table=table, failures=failures)
