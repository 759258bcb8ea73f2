import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import unitary_group

from mubkit.errors import ShapeError
from mubkit.services.cmat import (
    DensityMatrix,
    dagger,
    det_real,
    herm_eig,
    hs_inner,
    identity,
    is_hermitian,
    kron,
    kron_all,
    matrix_from_payload,
    matrix_to_payload,
    op_norm,
    psd_sqrt,
)
from mubkit.services.gf import make_field
from mubkit.services.weyl import clock_V, shift_U


def test_hs_inner():
    assert hs_inner(identity(3), identity(3)) == pytest.approx(3)
    x = np.array([[1, 2j], [0, -1]])
    assert hs_inner(x, x) == pytest.approx(np.linalg.norm(x, "fro") ** 2)
    with pytest.raises(ShapeError):
        hs_inner(identity(2), identity(3))

def test_hs_inner_sesquilinear(rng):
    x, y, z = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    a, b = 2 - 1j, 0.5 + 3j
    assert hs_inner(x, y) == pytest.approx(np.conj(hs_inner(y, x)))
    assert hs_inner(x, a * y + b * z) == pytest.approx(a * hs_inner(x, y) + b * hs_inner(x, z))
    assert hs_inner(a * x, y) == pytest.approx(np.conj(a) * hs_inner(x, y))



def test_hs_inner_of_weyl_words_is_d():
    field = make_field(5)
    for a in field.elements():
        for b in field.elements():
            w = shift_U(field, a) @ clock_V(field, b)
            assert hs_inner(w, w) == pytest.approx(5)


def test_kron(rng):
    assert np.allclose(kron(identity(2), identity(3)), identity(6))
    assert np.allclose(kron(np.diag([1, -1]), identity(2)), np.diag([1, 1, -1, -1]))
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.trace(kron(a, b)) == pytest.approx(np.trace(a) * np.trace(b))
    assert np.allclose(kron_all([a, b, identity(2)]), np.kron(np.kron(a, b), identity(2)))

def test_kron_is_associative_on_integers(rng):
    a = rng.integers(-5, 6, size=(2, 2)) + 1j * rng.integers(-5, 6, size=(2, 2))
    b = rng.integers(-5, 6, size=(3, 3))
    c = rng.integers(-5, 6, size=(2, 2)) + 1j * rng.integers(-5, 6, size=(2, 2))
    assert np.array_equal(kron(kron(a, b), c), kron(a, kron(b, c)))



def test_herm_eig_examples():
    vals, _ = herm_eig(np.diag([3.0, 1.0]))
    assert np.allclose(vals, [3, 1])
    vals, vecs = herm_eig(np.array([[0, 1], [1, 0]]))
    assert np.allclose(vals, [1, -1])
    assert np.allclose(vecs.conj().T @ vecs, identity(2))


def test_herm_eig_reconstructs(rng):
    g = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    h = g + dagger(g)
    vals, vecs = herm_eig(h)
    assert np.all(np.diff(vals) <= 0)
    assert np.max(np.abs(vecs @ np.diag(vals) @ dagger(vecs) - h)) <= 1e-9
    lead = vecs[np.argmax(np.abs(vecs) > 1e-12, axis=0), np.arange(5)]
    assert np.allclose(lead.imag, 0) and np.all(lead.real > 0)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(ShapeError):
        herm_eig(np.array([[0, 1], [0, 0]]))


def test_op_norm():
    assert op_norm(identity(4)) == pytest.approx(1)
    assert op_norm(np.zeros((3, 3))) == 0
    u = unitary_group.rvs(3, random_state=1)
    assert op_norm(2 * u) == pytest.approx(2)


def test_det_real():
    assert det_real(identity(3)) == pytest.approx(1)
    assert det_real(np.array([[2, 1], [1, 2]])) == pytest.approx(3)
    assert det_real(np.diag([2.0, 0.0])) == 0
    n = 4
    assert det_real(np.eye(n) + np.ones((n, n))) == pytest.approx(n + 1)

@pytest.mark.parametrize("d", range(2, 10))
def test_inverse_of_identity_plus_ones(d):
    n = d - 1
    g = np.eye(n) + np.ones((n, n))
    assert det_real(g) == pytest.approx(d)
    assert np.allclose(np.linalg.inv(g), np.eye(n) - np.ones((n, n)) / d, atol=1e-12)



def test_psd_sqrt(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = g @ dagger(g)
    root = psd_sqrt(a)
    assert is_hermitian(root, 1e-9)
    assert np.allclose(root @ root, a)


def test_payload_round_trip():
    m = np.array([[1 + 2j, 0], [0.5, -1j]])
    payload = matrix_to_payload(m)
    assert payload.rows == 2 and payload.cols == 2
    assert payload.entries[0] == (1.0, 2.0)
    assert np.array_equal(matrix_from_payload(payload), m)


def test_density_matrix_invariants():
    DensityMatrix(mat=identity(3) / 3)
    with pytest.raises(ValidationError, match="unit trace"):
        DensityMatrix(mat=identity(2))
    with pytest.raises(ValidationError, match="nonnegative"):
        DensityMatrix(mat=np.diag([1.1, -0.1]))
    with pytest.raises(ValidationError, match="hermitian"):
        DensityMatrix(mat=np.array([[0.5, 1], [0, 0.5]]))
