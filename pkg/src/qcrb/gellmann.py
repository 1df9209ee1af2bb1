"""Generalized Gell-Mann matrices and su(d) structure constants.

Normalization is ``Tr(lambda_j lambda_k) = delta_jk``.  The basis order is
fixed: all symmetric off-diagonal matrices for pairs ``(a, b)``, ``a < b`` in
lexicographic order, then the antisymmetric ones in the same pair order, then
the ``d - 1`` diagonal matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
import numpy.typing as npt

MAX_DIM = 16


@dataclass(frozen=True)
class GmmBasis:
    """The ``d**2 - 1`` orthonormal traceless Hermitian generators of su(d)."""

    dim: int
    matrices: npt.NDArray[np.complex128] = field(repr=False)
    labels: tuple[str, ...] = field(repr=False)

    @property
    def count(self) -> int:
        return self.matrices.shape[0]

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, j: int) -> npt.NDArray[np.complex128]:
        return self.matrices[j]

    def kinds(self) -> tuple[str, ...]:
        """``'sym'``, ``'anti'`` or ``'diag'`` for each element."""
        return tuple(lbl.split("_")[0] for lbl in self.labels)


@dataclass(frozen=True)
class StructureConstants:
    """``d_sym[j,k,l] = Tr({l_j, l_k} l_l)`` and ``f_anti[j,k,l] = -i Tr([l_j, l_k] l_l)``."""

    d_sym: npt.NDArray[np.float64] = field(repr=False)
    f_anti: npt.NDArray[np.float64] = field(repr=False)

    @property
    def count(self) -> int:
        return self.d_sym.shape[0]


@dataclass(frozen=True)
class IdentityReport:
    """Max-norm residuals of the three GMM sum identities."""

    dim: int
    square_sum: float
    sandwich: float
    quartic: float

    @property
    def max_residual(self) -> float:
        return max(self.square_sum, self.sandwich, self.quartic)


def gmm_basis(d: int) -> GmmBasis:
    """Generalized Gell-Mann basis for dimension ``d`` (``2 <= d <= 16``)."""
    if not isinstance(d, (int, np.integer)) or not 2 <= d <= MAX_DIM:
        raise ValueError(f"dimension must be an integer in [2, {MAX_DIM}], got {d!r}")
    return _gmm_basis_cached(int(d))


@lru_cache(maxsize=None)
def _gmm_basis_cached(d: int) -> GmmBasis:
    mats = []
    labels = []
    pairs = list(combinations(range(d), 2))
    s = 1.0 / np.sqrt(2.0)
    for a, b in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[a, b] = m[b, a] = s
        mats.append(m)
        labels.append(f"sym_{a}{b}")
    for a, b in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[a, b] = -1j * s
        m[b, a] = 1j * s
        mats.append(m)
        labels.append(f"anti_{a}{b}")
    for k in range(1, d):
        diag = np.zeros(d)
        diag[:k] = 1.0
        diag[k] = -float(k)
        mats.append(np.diag(diag / np.sqrt(k * (k + 1))).astype(complex))
        labels.append(f"diag_{k}")
    arr = np.array(mats)
    arr.setflags(write=False)
    return GmmBasis(dim=d, matrices=arr, labels=tuple(labels))


def structure_constants(basis: GmmBasis) -> StructureConstants:
    """Fully symmetric ``d`` and fully antisymmetric ``f`` tensors of su(d)."""
    lam = basis.matrices
    # t[j,k,l] = Tr(l_j l_k l_l)
    t = np.einsum("jab,kbc,lca->jkl", lam, lam, lam, optimize=True)
    t_swapped = t.transpose(1, 0, 2)
    d_sym = (t + t_swapped).real
    f_anti = (-1j * (t - t_swapped)).real
    return StructureConstants(d_sym=d_sym, f_anti=f_anti)


def product_rule_residual(basis: GmmBasis, sc: StructureConstants) -> float:
    """Max residual of ``2 l_m l_j = (2/d) delta 1 + sum_c (d_mjc + i f_mjc) l_c``."""
    lam = basis.matrices
    d = basis.dim
    lhs = 2.0 * np.einsum("mab,jbc->mjac", lam, lam)
    coeff = sc.d_sym + 1j * sc.f_anti
    rhs = np.einsum("mjc,cab->mjab", coeff, lam)
    rhs = rhs + (2.0 / d) * np.eye(basis.count)[:, :, None, None] * np.eye(d)[None, None]
    return float(np.max(np.abs(lhs - rhs)))


def circled_sums(sc: StructureConstants, d: int) -> tuple[float, float]:
    """Residuals of ``sum d_jmc d_pmc = 2(d^2-4)/d delta`` and ``sum f_jmc f_pmc = 2d delta``."""
    n = sc.count
    dd = np.einsum("jmc,pmc->jp", sc.d_sym, sc.d_sym)
    ff = np.einsum("jmc,pmc->jp", sc.f_anti, sc.f_anti)
    r_d = np.max(np.abs(dd - 2.0 * (d * d - 4) / d * np.eye(n)))
    r_f = np.max(np.abs(ff - 2.0 * d * np.eye(n)))
    return float(r_d), float(r_f)


def jacobi_residual(sc: StructureConstants, triples=None, seed: int = 0, count: int = 50) -> float:
    """Max residual of the mixed d/f Jacobi identity over index triples.

    ``sum_k (d_abk f_kcl + d_bck f_kal + d_cak f_kbl) = 0`` for every ``l``.
    """
    n = sc.count
    if triples is None:
        rng = np.random.default_rng(seed)
        triples = rng.integers(0, n, size=(count, 3))
    dsym, f = sc.d_sym, sc.f_anti
    worst = 0.0
    for a, b, c in triples:
        val = dsym[a, b] @ f[:, c, :] + dsym[b, c] @ f[:, a, :] + dsym[c, a] @ f[:, b, :]
        worst = max(worst, float(np.max(np.abs(val))))
    return worst


def symmetry_residuals(sc: StructureConstants) -> tuple[float, float, float]:
    """Deviation from full (anti)symmetry, and ``max_j |sum_m d_mjm|``."""
    d, f = sc.d_sym, sc.f_anti
    perms = [(1, 0, 2), (0, 2, 1), (2, 1, 0)]
    r_sym = max(float(np.max(np.abs(d - d.transpose(p)))) for p in perms)
    r_anti = max(float(np.max(np.abs(f + f.transpose(p)))) for p in perms)
    trace_d = float(np.max(np.abs(np.einsum("mjm->j", d)), initial=0.0))
    return r_sym, r_anti, trace_d


def conjugation_sum(a: npt.ArrayLike, basis: GmmBasis) -> npt.NDArray[np.complex128]:
    """``sum_m lambda_m A lambda_m``; equals ``-A/d`` for traceless ``A``."""
    lam = basis.matrices
    return np.einsum("mab,bc,mcd->ad", lam, np.asarray(a, dtype=complex), lam)


def verify_identities(basis: GmmBasis) -> IdentityReport:
    """Residuals of the square-sum, sandwich and quartic identities."""
    lam = basis.matrices
    d = basis.dim
    ident = np.eye(d)
    sq = np.einsum("jab,jbc->ac", lam, lam)
    r1 = np.max(np.abs(sq - (d * d - 1) / d * ident))
    sandwich = np.einsum("mab,jbc,mcd->jad", lam, lam, lam)
    r2 = np.max(np.abs(sandwich + lam / d))
    # sum_jk l_j l_k l_j l_k = sum_k (sum_j l_j l_k l_j) l_k
    quartic = np.einsum("kab,kbc->ac", sandwich, lam)
    r3 = np.max(np.abs(quartic + (d * d - 1) / (d * d) * ident))
    return IdentityReport(dim=d, square_sum=float(r1), sandwich=float(r2), quartic=float(r3))


def gram_matrix(basis: GmmBasis) -> npt.NDArray[np.float64]:
    lam = basis.matrices
    return np.einsum("jab,kba->jk", lam, lam).real
