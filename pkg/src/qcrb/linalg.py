"""Dense complex-Hermitian matrix kernel.

Hermitian matrices are carried as read-only ``complex128`` numpy arrays
produced by :func:`hermitian`.  Classical-quantum matrices (operators on
``C^n (x) C^d``) are plain ``(n*d, n*d)`` arrays; :func:`cq_blocks` and
:func:`cq_from_blocks` convert between the dense and the block view.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla

from .errors import SolverError

HERMITIAN_TOL = 1e-12

ArrayLike = npt.ArrayLike
NDArray = npt.NDArray


def hermitian(a: ArrayLike, tol: float | None = HERMITIAN_TOL) -> NDArray[np.complex128]:
    """Return the Hermitian part ``(A + A^dagger)/2`` as a read-only array.

    Parameters
    ----------
    a : array_like
        Square matrix.
    tol : float or None
        If given, raise ``ValueError`` when ``A`` deviates from its
        conjugate transpose by more than ``tol`` (relative to ``max(1, |A|)``).
    """
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if tol is not None:
        dev = np.max(np.abs(m - m.conj().T), initial=0.0)
        scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
        if dev > tol * scale:
            raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    h = 0.5 * (m + m.conj().T)
    h.setflags(write=False)
    return h


def is_hermitian(a: ArrayLike, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol * scale)


def eig_herm(a: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    """Eigendecomposition ``A = U diag(w) U^dagger`` with ``w`` ascending.

    Uses LAPACK's Hermitian tridiagonal reduction, which is deterministic.
    """
    m = np.asarray(a)
    try:
        w, u = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SolverError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return w, u


def eigvals_herm(a: ArrayLike) -> NDArray[np.float64]:
    try:
        return np.linalg.eigvalsh(np.asarray(a))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SolverError(f"Hermitian eigensolver did not converge: {exc}") from exc


def min_eig(a: ArrayLike) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(eigvals_herm(a)[0])


def trace_norm(a: ArrayLike) -> float:
    """Sum of singular values; for Hermitian input, sum of absolute eigenvalues."""
    m = np.asarray(a)
    if m.size == 0:
        return 0.0
    if is_hermitian(m, tol=1e-10):
        return float(np.sum(np.abs(eigvals_herm(0.5 * (m + m.conj().T)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def is_psd(a: ArrayLike, tol: float = 1e-10) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol``."""
    return min_eig(a) >= -tol


def sqrtm_psd(a: ArrayLike) -> NDArray[np.complex128]:
    """Principal square root of a PSD matrix; tiny negative eigenvalues are clipped."""
    w, u = eig_herm(a)
    return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T


def inv_sqrtm_psd(a: ArrayLike) -> NDArray[np.complex128]:
    w, u = eig_herm(a)
    if w[0] <= 0:
        raise SolverError("inverse square root of a singular matrix")
    return (u / np.sqrt(w)) @ u.conj().T


def powm_psd(a: ArrayLike, power: float) -> NDArray[np.complex128]:
    w, u = eig_herm(a)
    if power < 0 and w[0] <= 0:
        raise SolverError("negative power of a singular matrix")
    return (u * np.clip(w, 0.0, None) ** power) @ u.conj().T


def kron_all(mats: Sequence[ArrayLike]) -> NDArray:
    out = np.array([[1.0]])
    for m in mats:
        out = np.kron(out, m)
    return out


def herm_to_real_embed(a: ArrayLike) -> NDArray[np.float64]:
    """Real symmetric image ``[[Re A, -Im A], [Im A, Re A]]`` of a Hermitian matrix."""
    m = np.asarray(a)
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def real_to_herm_unembed(m: ArrayLike) -> NDArray[np.complex128]:
    """Inverse of :func:`herm_to_real_embed`, averaging the redundant copies."""
    r = np.asarray(m, dtype=float)
    n2 = r.shape[0]
    if n2 % 2 or r.shape != (n2, n2):
        raise ValueError("embedded matrix must be square with even size")
    n = n2 // 2
    re = 0.5 * (r[:n, :n] + r[n:, n:])
    im = 0.5 * (r[n:, :n] - r[:n, n:])
    return re + 1j * im


def herm_basis_vec(a: ArrayLike, d: int | None = None) -> NDArray[np.float64]:
    """Coordinates of ``A`` in the orthonormal basis ``{1/sqrt(d)} + GMMs``.

    The first coordinate multiplies ``1_d/sqrt(d)``; the rest are the
    generalized Gell-Mann coefficients in :func:`qcrb.gellmann.gmm_basis` order.
    """
    m = np.asarray(a)
    if d is None:
        d = m.shape[0]
    if m.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix, got shape {m.shape}")
    frame = _vec_frame(d)
    return np.einsum("kab,ba->k", frame, m).real


def herm_basis_unvec(v: ArrayLike, d: int) -> NDArray[np.complex128]:
    """Inverse of :func:`herm_basis_vec`."""
    vec = np.asarray(v, dtype=float)
    if vec.shape != (d * d,):
        raise ValueError(f"expected a vector of length {d * d}, got {vec.shape}")
    return np.einsum("k,kab->ab", vec, _vec_frame(d))


_FRAMES: dict[int, NDArray[np.complex128]] = {}


def _vec_frame(d: int) -> NDArray[np.complex128]:
    if d not in _FRAMES:
        from .gellmann import gmm_basis

        ident = np.eye(d, dtype=complex)[None] / np.sqrt(d)
        _FRAMES[d] = np.concatenate([ident, gmm_basis(d).matrices], axis=0)
    return _FRAMES[d]


def hs_inner(a: ArrayLike, b: ArrayLike) -> float:
    """Real Hilbert-Schmidt inner product ``Re Tr(A^dagger B)``."""
    return float(np.vdot(np.asarray(a), np.asarray(b)).real)


def cq_from_blocks(blocks: ArrayLike) -> NDArray:
    """Assemble an ``(n, n, d, d)`` block array into a dense ``(nd, nd)`` matrix."""
    b = np.asarray(blocks)
    n, n2, d, d2 = b.shape
    if n != n2 or d != d2:
        raise ValueError(f"bad block shape {b.shape}")
    return b.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def cq_blocks(m: ArrayLike, n: int, d: int) -> NDArray:
    """Split a dense ``(nd, nd)`` matrix into an ``(n, n, d, d)`` block array."""
    a = np.asarray(m)
    if a.shape != (n * d, n * d):
        raise ValueError(f"expected shape {(n * d, n * d)}, got {a.shape}")
    return a.reshape(n, d, n, d).transpose(0, 2, 1, 3)


def outer_blocks(ops: ArrayLike) -> NDArray:
    """Dense cq-matrix with blocks ``X_j X_k`` for a stack of operators ``X``."""
    x = np.asarray(ops)
    n, d, _ = x.shape
    col = x.reshape(n * d, d)
    return col @ x.transpose(1, 0, 2).reshape(d, n * d)


def cholesky_or_none(a: ArrayLike) -> NDArray | None:
    try:
        return sla.cholesky(np.asarray(a), lower=True)
    except np.linalg.LinAlgError:
        return None
