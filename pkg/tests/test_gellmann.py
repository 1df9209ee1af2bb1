import numpy as np
import pytest

from qcrb import gellmann
from qcrb.errors import UnsupportedDimensionError


@pytest.mark.parametrize("d", range(2, 9))
def test_basis_orthonormal_traceless(d):
    b = gellmann.gmm_basis(d)
    assert b.count == d * d - 1
    np.testing.assert_allclose(gellmann.gram_matrix(b), np.eye(d * d - 1), atol=1e-14)
    for m in b.matrices:
        np.testing.assert_allclose(m, m.conj().T)
        assert abs(np.trace(m)) < 1e-14
    kinds = b.kinds()
    assert kinds.count("sym") == kinds.count("anti") == d * (d - 1) // 2
    assert kinds.count("diag") == d - 1


def test_qubit_basis_is_scaled_paulis():
    b = gellmann.gmm_basis(2).matrices * np.sqrt(2)
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    for p in paulis:
        assert any(np.allclose(p, m) for m in b)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_structure_constants(d):
    b = gellmann.gmm_basis(d)
    sc = gellmann.structure_constants(b)
    assert gellmann.product_rule_residual(b, sc) < 1e-12
    assert max(gellmann.symmetry_residuals(sc)) < 1e-12
    assert gellmann.jacobi_residual(sc) < 1e-12
    assert max(gellmann.circled_sums(sc, d)) < 1e-12
    assert gellmann.verify_identities(b).max_residual < 1e-12


def test_su2_structure_constants():
    sc = gellmann.structure_constants(gellmann.gmm_basis(2))
    # [s_j, s_k] = 2i eps_jkl s_l with s = sqrt(2) lambda
    assert np.max(np.abs(sc.d_sym)) < 1e-14
    np.testing.assert_allclose(np.sort(np.abs(sc.f_anti[np.abs(sc.f_anti) > 1e-9])), np.full(6, np.sqrt(2)))


@pytest.mark.parametrize("d", [2, 4])
def test_conjugation_sum(rng, d):
    b = gellmann.gmm_basis(d)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    # sum_j l_j A l_j = Tr(A) 1 - A/d
    np.testing.assert_allclose(gellmann.conjugation_sum(a, b), np.trace(a) * np.eye(d) - a / d, atol=1e-12)


def test_bad_dimension():
    with pytest.raises((UnsupportedDimensionError, ValueError)):
        gellmann.gmm_basis(1)
