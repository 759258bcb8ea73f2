import itertools

import numpy as np
import pytest
from scipy.stats import unitary_group

from mubkit.errors import InvalidMeasurementError, ShapeError, UnsupportedDimensionError
from mubkit.services.cmat import identity
from mubkit.services.gf import make_field
from mubkit.services.mub import (
    CheckMode,
    NormVerdict,
    check_smub,
    check_wmub_det,
    check_wmub_norm,
    family_from_matrices,
    measurement_family,
    mub_suite,
    mub_suite_for_dimension,
    overlap_L,
    pairwise_checks,
    projector_P,
    schur_matrix,
    wmub_matrix,
    wmub_oracle,
)
from mubkit.services.weyl import INF

PRIME_POWERS = [2, 3, 4, 5, 7, 8, 9]


def rotated_basis(u: np.ndarray, label="rotated"):
    return family_from_matrices(label, [np.outer(u[:, k], u[:, k].conj()) for k in range(u.shape[0])])


def givens(d: int, theta: float, i: int = 0, j: int = 1) -> np.ndarray:
    g = np.eye(d, dtype=np.complex128)
    c, s = np.cos(theta), np.sin(theta)
    g[i, i], g[i, j], g[j, i], g[j, j] = c, -s, s, c
    return g


def test_projector_examples():
    f2 = make_field(2)
    assert np.allclose(projector_P(f2, INF, f2.zero), np.diag([1, 0]))
    assert np.allclose(projector_P(f2, f2.zero, f2.zero), [[0.5, 0.5], [0.5, 0.5]])

    f3 = make_field(3)
    fam = measurement_family(f3, INF)
    for k in range(3):
        expected = np.zeros((3, 3))
        expected[k, k] = 1
        assert np.allclose(fam.projectors[k], expected)


def test_projector_matches_family():
    field = make_field(2, 2)
    for a in [field.one, INF]:
        fam = measurement_family(field, a)
        for y in field.elements():
            assert np.allclose(projector_P(field, a, y), fam.projectors[y.index])


@pytest.mark.parametrize("d", PRIME_POWERS)
def test_suite_families_are_measurements(d):
    suite = mub_suite_for_dimension(d)
    assert len(suite.families) == d + 1
    for fam in suite.families:
        P = fam.projectors
        assert np.max(np.abs(np.einsum("zij,zjk->zik", P, P) - P)) <= 1e-9
        assert np.max(np.abs(P - P.conj().transpose(0, 2, 1))) <= 1e-9
        assert np.allclose(np.trace(P, axis1=1, axis2=2), 1)
        assert np.max(np.abs(P.sum(axis=0) - identity(d))) <= 1e-9


@pytest.mark.parametrize("d", PRIME_POWERS)
def test_pairwise_smub(d):
    suite = mub_suite_for_dimension(d)
    for m1, m2 in itertools.combinations(suite.families, 2):
        report = check_smub(m1, m2)
        assert report.is_smub
        assert report.max_deviation <= 1e-9
        assert np.max(np.abs(overlap_L(m1, m2))) <= 1e-9


def test_suite_over_f4_not_z4():
    suite = mub_suite_for_dimension(4)
    assert suite.field == make_field(2, 2)
    assert len(suite.families) == 5


def test_composite_dimension_unsupported():
    with pytest.raises(UnsupportedDimensionError):
        mub_suite_for_dimension(6)


def test_self_pair():
    suite = mub_suite(make_field(3))
    m = suite.families[0]
    assert not check_smub(m, m).is_smub
    L = overlap_L(m, m)
    assert np.allclose(L, np.eye(2) + np.ones((2, 2)))
    assert not check_wmub_det(m, m).is_wmub
    assert check_wmub_norm(m, m) is NormVerdict.INCONCLUSIVE
    assert not wmub_oracle(m, m)


def test_smub_pair_verdicts():
    suite = mub_suite(make_field(5))
    m1, m2 = suite.families[0], suite.families[-1]
    report = check_wmub_det(m1, m2)
    assert report.is_wmub
    assert report.det_value == pytest.approx(5)
    assert check_wmub_norm(m1, m2) is NormVerdict.SMUB
    assert wmub_oracle(m1, m2)


def test_slightly_rotated_basis_is_not_smub():
    z = rotated_basis(np.eye(3), "z")
    near = rotated_basis(givens(3, 0.01), "near")
    assert not check_smub(z, near).is_smub


def test_norm_test_sufficiency():
    # d = 2: L = 2 cos(2 theta); ||L|| = 0.5 at cos(2 theta) = 0.25
    theta = np.arccos(0.25) / 2
    z = rotated_basis(np.eye(2), "z")
    tilted = rotated_basis(givens(2, theta), "tilted")
    assert op_close(overlap_L(z, tilted), 0.5)
    assert check_wmub_norm(z, tilted) is NormVerdict.WMUB
    assert check_wmub_det(z, tilted).is_wmub


def op_close(L, value):
    return abs(np.linalg.norm(L, 2) - value) <= 1e-9


def test_schur_form_matches_determinant_form(rng):
    for d in (2, 3, 4):
        for _ in range(10):
            u = unitary_group.rvs(d, random_state=rng)
            L = overlap_L(rotated_basis(np.eye(d)), rotated_basis(u))
            G = np.eye(d - 1) + np.ones((d - 1, d - 1))
            # det(G) = d
            lhs = np.linalg.det(wmub_matrix(L, d)).real
            rhs = np.linalg.det(schur_matrix(L, d)).real
            assert lhs == pytest.approx(rhs, abs=1e-9)
            assert np.linalg.det(G) == pytest.approx(d)


def test_determinant_agrees_with_oracle(rng):
    for d in (2, 3, 4):
        z = rotated_basis(np.eye(d), "z")
        cases = []
        for _ in range(70):
            cases.append(unitary_group.rvs(d, random_state=rng))
        for theta in (1e-4, 1e-2, 0.3):
            cases.append(givens(d, theta))
        if d > 2:
            # a shared basis vector gives a nontrivial common projection
            for _ in range(27):
                block = np.eye(d, dtype=np.complex128)
                block[:2, :2] = unitary_group.rvs(2, random_state=rng)
                cases.append(block)
        else:
            for _ in range(27):
                cases.append(unitary_group.rvs(2, random_state=rng))
        for u in cases:
            other = rotated_basis(u)
            assert check_wmub_det(z, other).is_wmub == wmub_oracle(z, other)


def test_near_degenerate_rotation_qubit():
    z = rotated_basis(np.eye(2), "z")
    tilted = rotated_basis(givens(2, 1e-4), "tilted")
    assert check_wmub_det(z, tilted).is_wmub
    assert wmub_oracle(z, tilted)


def test_family_validation_names_invariant():
    P = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    family_from_matrices("ok", P)

    with pytest.raises(InvalidMeasurementError) as exc:
        family_from_matrices("bad", [np.diag([1.0, 0.5]), np.diag([0.0, 0.5])])
    assert exc.value.invariant == "idempotent"

    with pytest.raises(InvalidMeasurementError) as exc:
        family_from_matrices("short", [np.diag([1.0, 0.0])])
    assert exc.value.invariant == "cardinality"

    with pytest.raises(InvalidMeasurementError) as exc:
        family_from_matrices("same", [np.diag([1.0, 0.0]), np.diag([1.0, 0.0])])
    assert exc.value.invariant == "orthogonal"


def test_dimension_mismatch():
    a = mub_suite(make_field(2)).families[0]
    b = mub_suite(make_field(3)).families[0]
    with pytest.raises(ShapeError):
        check_smub(a, b)


def test_pairwise_checks_frame():
    suite = mub_suite(make_field(3))
    frame = pairwise_checks(suite.families, CheckMode.ALL)
    assert len(frame) == 6
    assert frame["passed"].all()
    assert set(frame.columns) >= {"first", "second", "smub", "wmub", "det_value", "norm_test"}

    dup = pairwise_checks([suite.families[0], suite.families[0]], CheckMode.WMUB)
    assert not dup["passed"].any()
    assert "smub" not in dup.columns
