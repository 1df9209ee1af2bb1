import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qcrb import linalg


def _herm(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return g + g.conj().T


def test_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        linalg.hermitian([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        linalg.hermitian(np.zeros((2, 3)))


def test_hermitian_is_read_only(rng):
    h = linalg.hermitian(_herm(rng, 3))
    with pytest.raises(ValueError):
        h[0, 0] = 1.0


def test_eig_reconstructs(rng):
    a = _herm(rng, 5)
    w, u = linalg.eig_herm(a)
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(u @ np.diag(w) @ u.conj().T, a, atol=1e-12)


def test_trace_norm_matches_svd(rng):
    a = _herm(rng, 4)
    assert linalg.trace_norm(a) == pytest.approx(np.sum(np.linalg.svd(a, compute_uv=False)))
    b = rng.normal(size=(3, 3))
    assert linalg.trace_norm(b) == pytest.approx(np.sum(np.linalg.svd(b, compute_uv=False)))


def test_matrix_functions(rng):
    g = _herm(rng, 4)
    p = g @ g + 0.1 * np.eye(4)
    s = linalg.sqrtm_psd(p)
    np.testing.assert_allclose(s @ s, p, atol=1e-10)
    np.testing.assert_allclose(linalg.inv_sqrtm_psd(p) @ s, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(linalg.powm_psd(p, -1.0), np.linalg.inv(p), atol=1e-9)
    assert linalg.is_psd(p)
    assert not linalg.is_psd(-p)


def test_singular_inverse_root_raises():
    with pytest.raises(linalg.SolverError):
        linalg.inv_sqrtm_psd(np.diag([1.0, 0.0]))


def test_real_embedding_preserves_spectrum(rng):
    a = _herm(rng, 3)
    e = linalg.herm_to_real_embed(a)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(e)), np.sort(np.repeat(np.linalg.eigvalsh(a), 2)), atol=1e-12)
    np.testing.assert_allclose(linalg.real_to_herm_unembed(e), a, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (16,), elements=st.floats(-5, 5)))
def test_basis_vec_roundtrip(v):
    m = linalg.herm_basis_unvec(v, 4)
    assert linalg.is_hermitian(m)
    np.testing.assert_allclose(linalg.herm_basis_vec(m), v, atol=1e-12)
    # orthonormal frame preserves the Hilbert-Schmidt norm
    assert linalg.hs_inner(m, m) == pytest.approx(float(v @ v), abs=1e-10)


def test_cq_block_roundtrip(rng):
    blocks = rng.normal(size=(3, 3, 2, 2))
    dense = linalg.cq_from_blocks(blocks)
    np.testing.assert_array_equal(linalg.cq_blocks(dense, 3, 2), blocks)
    assert dense[2 * 1 + 1, 2 * 2 + 0] == blocks[1, 2, 1, 0]


def test_outer_blocks(rng):
    x = np.array([_herm(rng, 2) for _ in range(3)])
    blocks = linalg.cq_blocks(linalg.outer_blocks(x), 3, 2)
    for j in range(3):
        for k in range(3):
            np.testing.assert_allclose(blocks[j, k], x[j] @ x[k], atol=1e-12)


def test_kron_all():
    a, b = np.diag([1.0, 2.0]), np.array([[0, 1], [1, 0]])
    np.testing.assert_array_equal(linalg.kron_all([a, b]), np.kron(a, b))


def test_cholesky_or_none():
    assert linalg.cholesky_or_none(np.eye(2)) is not None
    assert linalg.cholesky_or_none(-np.eye(2)) is None
