"""Local statistical models and the locally-unbiased operator constraints.

A model is the local data of a smooth state family at the true parameter:
the state ``rho``, its ``n`` partial derivatives, a weight matrix ``W`` and
the true parameter vector ``theta_star``.  Only this local data enters any of
the bounds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import numpy.typing as npt

from . import linalg
from .errors import InvalidModelError, InvalidStateError
from .gellmann import gmm_basis

DEFAULT_EPSILON = 1e-6
GRAM_TOL = 1e-8
STATE_TOL = 1e-10
LUB_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StatModel:
    """Local data ``(rho, {d_j rho}, W, theta_star)`` of an ``n``-parameter qudit model."""

    rho: npt.NDArray[np.complex128] = field(repr=False)
    derivs: npt.NDArray[np.complex128] = field(repr=False)
    weight: npt.NDArray[np.float64] = field(repr=False)
    theta_star: npt.NDArray[np.float64] = field(repr=False)
    label: str = ""

    def __post_init__(self) -> None:
        rho = np.array(self.rho, dtype=complex)
        derivs = np.array(self.derivs, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidModelError(f"rho must be a square matrix, got shape {rho.shape}")
        d = rho.shape[0]
        if derivs.ndim == 2:
            derivs = derivs[None]
        if derivs.ndim != 3 or derivs.shape[1:] != (d, d):
            raise InvalidModelError(f"derivs must have shape (n, {d}, {d}), got {derivs.shape}")
        n = derivs.shape[0]
        weight = np.eye(n) if self.weight is None else np.array(self.weight, dtype=float)
        theta = np.zeros(n) if self.theta_star is None else np.array(self.theta_star, dtype=float).ravel()
        for name, arr in (("rho", rho), ("derivs", derivs), ("weight", weight), ("theta_star", theta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        _validate(self)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def n_params(self) -> int:
        return self.derivs.shape[0]

    d = dim
    n = n_params

    @property
    def theta_correction(self) -> float:
        """``theta*^T W theta*``, the term subtracted from the Holevo-type bounds."""
        return float(self.theta_star @ self.weight @ self.theta_star)

    def with_weight(self, weight: npt.ArrayLike) -> "StatModel":
        return replace(self, weight=np.asarray(weight, dtype=float))

    def with_label(self, label: str) -> "StatModel":
        return replace(self, label=label)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready mapping; complex matrices become row-major ``[re, im]`` pairs."""
        return {
            "d": self.dim,
            "n": self.n_params,
            "rho": encode_matrix(self.rho),
            "derivs": [encode_matrix(m) for m in self.derivs],
            "weight": self.weight.tolist(),
            "theta_star": self.theta_star.tolist(),
            "label": self.label,
        }

    def content_hash(self) -> str:
        """Short digest of the numeric content, stable across runs."""
        h = hashlib.sha256()
        for arr in (self.rho, self.derivs, self.weight, self.theta_star):
            h.update(np.ascontiguousarray(np.round(arr, 12)).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class LubFamily:
    """Affine family of locally-unbiased operator tuples ``X = particular + sum_c c_i N_i``."""

    particular: npt.NDArray[np.complex128] = field(repr=False)
    null_basis: npt.NDArray[np.complex128] = field(repr=False)

    @property
    def unique(self) -> bool:
        return self.null_basis.shape[0] == 0

    @property
    def null_dim(self) -> int:
        return self.null_basis.shape[0]

    def member(self, coeffs: npt.ArrayLike) -> npt.NDArray[np.complex128]:
        c = np.asarray(coeffs, dtype=float)
        if self.unique:
            return np.array(self.particular)
        return self.particular + np.einsum("i,ijab->jab", c, self.null_basis)


def _validate(m: StatModel) -> None:
    d, n = m.dim, m.n_params
    rho, derivs = m.rho, m.derivs
    if not linalg.is_hermitian(rho, 1e-10):
        raise InvalidModelError("rho is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > STATE_TOL or abs(np.trace(rho).imag) > STATE_TOL:
        raise InvalidModelError(f"rho does not have unit trace (trace {np.trace(rho):.6g})")
    lo = linalg.min_eig(rho)
    if lo < -STATE_TOL:
        raise InvalidModelError(f"rho is not positive semidefinite (min eigenvalue {lo:.3e})")
    if n == 0:
        raise InvalidModelError("model has no parameters")
    if n > d * d - 1:
        raise InvalidModelError(f"n = {n} exceeds the maximum {d * d - 1} independent parameters")
    for j, dj in enumerate(derivs):
        if not linalg.is_hermitian(dj, 1e-10):
            raise InvalidModelError(f"derivative {j} is not Hermitian")
        if abs(np.trace(dj)) > STATE_TOL:
            raise InvalidModelError(f"derivative {j} is not traceless")
    gram = np.einsum("jab,kba->jk", derivs, derivs).real
    if np.linalg.eigvalsh(gram)[0] <= GRAM_TOL:
        raise InvalidModelError("derivatives are linearly dependent")
    w = m.weight
    if w.shape != (n, n):
        raise InvalidModelError(f"weight must have shape ({n}, {n}), got {w.shape}")
    if np.max(np.abs(w - w.T), initial=0.0) > 1e-10:
        raise InvalidModelError("weight is not symmetric")
    if np.linalg.eigvalsh(w)[0] < -1e-10:
        raise InvalidModelError("weight is not positive semidefinite")
    if m.theta_star.shape != (n,):
        raise InvalidModelError(f"theta_star must have length {n}")
    if not np.all(np.isfinite(m.theta_star)):
        raise InvalidModelError("theta_star is not finite")


def make_model(
    rho: npt.ArrayLike,
    derivs: npt.ArrayLike,
    weight: npt.ArrayLike | None = None,
    theta_star: npt.ArrayLike | None = None,
    label: str = "",
) -> StatModel:
    """Validated constructor; Hermitian parts are taken after a closeness check."""
    rho_a = np.asarray(rho, dtype=complex)
    der = np.asarray(derivs, dtype=complex)
    if der.ndim == 2:
        der = der[None]
    try:
        rho_h = linalg.hermitian(rho_a, tol=1e-10)
        der_h = np.array([linalg.hermitian(x, tol=1e-10) for x in der])
    except ValueError as exc:
        raise InvalidModelError(str(exc)) from exc
    return StatModel(rho=rho_h, derivs=der_h, weight=weight, theta_star=theta_star, label=label)


def state_from_theta(d: int, theta: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """``1_d/d + sum_j theta_j lambda_j``; raises when the result is not a state."""
    lam = gmm_basis(d).matrices
    th = np.asarray(theta, dtype=float)
    if th.shape != (lam.shape[0],):
        raise InvalidModelError(f"theta must have length {lam.shape[0]}, got {th.shape}")
    rho = np.eye(d) / d + np.einsum("j,jab->ab", th, lam)
    lo = linalg.min_eig(rho)
    if lo < -STATE_TOL:
        raise InvalidStateError(f"coefficients give a non-positive state (min eigenvalue {lo:.3e})")
    return rho


def gmm_model(d: int, theta: npt.ArrayLike | None = None) -> StatModel:
    """Linear GMM model: ``rho = 1/d + sum theta_j lambda_j`` with all GMM derivatives."""
    basis = gmm_basis(d)
    th = np.zeros(basis.count) if theta is None else np.asarray(theta, dtype=float)
    rho = state_from_theta(d, th)
    return StatModel(rho=rho, derivs=basis.matrices, weight=None, theta_star=th, label=f"gmm(d={d})")


def gmm_subset_model(
    d: int, index_set: Iterable[int], theta_k: npt.ArrayLike | None = None
) -> StatModel:
    """Estimate the GMM coefficients with 1-based indices ``index_set``; the rest are zero."""
    basis = gmm_basis(d)
    ks = [int(k) for k in index_set]
    if not ks:
        raise InvalidModelError("index set is empty")
    if len(set(ks)) != len(ks) or min(ks) < 1 or max(ks) > basis.count:
        raise InvalidModelError(f"index set must be distinct integers in 1..{basis.count}")
    th_k = np.zeros(len(ks)) if theta_k is None else np.asarray(theta_k, dtype=float)
    if th_k.shape != (len(ks),):
        raise InvalidModelError("theta_k length must match the index set")
    full = np.zeros(basis.count)
    full[np.array(ks) - 1] = th_k
    rho = state_from_theta(d, full)
    idx = np.array(ks) - 1
    return StatModel(
        rho=rho,
        derivs=basis.matrices[idx],
        weight=None,
        theta_star=th_k,
        label=f"gmm-subset(d={d},K={','.join(map(str, ks))})",
    )


def qubit_model(r: float | Sequence[float]) -> StatModel:
    """Full qubit model at Bloch vector ``r`` in the convention ``rho = (1 + r.sigma)/2``.

    A scalar ``r`` points along ``z``.  GMM coefficients are ``r/sqrt(2)``.
    """
    rv = np.array([0.0, 0.0, float(r)]) if np.ndim(r) == 0 else np.asarray(r, dtype=float)
    # basis order for d=2 is (sigma_x, sigma_y, sigma_z)/sqrt(2)
    return gmm_model(2, rv / np.sqrt(2.0)).with_label(f"qubit(r={np.linalg.norm(rv):.6g})")


def onb_rotate(model: StatModel, eta: npt.ArrayLike) -> StatModel:
    """Replace derivatives by ``B_j = sum_k eta_jk D_k`` and ``theta`` by ``eta theta``."""
    e = np.asarray(eta, dtype=float)
    n = model.n_params
    if e.shape != (n, n):
        raise InvalidModelError(f"eta must have shape ({n}, {n})")
    if np.max(np.abs(e @ e.T - np.eye(n))) > 1e-10:
        raise InvalidModelError("eta is not orthogonal")
    derivs = np.einsum("jk,kab->jab", e, model.derivs)
    return StatModel(
        rho=model.rho,
        derivs=derivs,
        weight=model.weight,
        theta_star=e @ model.theta_star,
        label=model.label + "+rot",
    )


def plus_state(d: int) -> npt.NDArray[np.complex128]:
    v = np.ones(d) / np.sqrt(d)
    return np.outer(v, v).astype(complex)


def regularize(rho: npt.ArrayLike, eps: float = DEFAULT_EPSILON) -> npt.NDArray[np.complex128]:
    """``(1 - eps) rho + eps 1_d/d``."""
    r = np.asarray(rho, dtype=complex)
    d = r.shape[0]
    return (1.0 - eps) * r + eps * np.eye(d) / d


def theta_of_state(rho: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """GMM coefficients ``Tr(rho lambda_j)`` of a state."""
    r = np.asarray(rho)
    lam = gmm_basis(r.shape[0]).matrices
    return np.einsum("jab,ba->j", lam, r).real


def full_model_at(rho: npt.ArrayLike, label: str = "") -> StatModel:
    """Full GMM model at an arbitrary state; ``theta_star`` is its GMM coefficient vector."""
    r = linalg.hermitian(rho, tol=1e-10)
    d = r.shape[0]
    return StatModel(
        rho=r, derivs=gmm_basis(d).matrices, weight=None, theta_star=theta_of_state(r), label=label
    )


def depolarized_plus_model(d: int, p: float, eps: float = 0.0) -> StatModel:
    """Full GMM model at ``p |+><+| + (1-p) 1_d/d``, optionally ``eps``-regularized."""
    if not 0.0 <= p <= 1.0:
        raise InvalidModelError(f"p must lie in [0, 1], got {p}")
    rho = p * plus_state(d) + (1.0 - p) * np.eye(d) / d
    if eps:
        rho = regularize(rho, eps)
    return full_model_at(rho, label=f"rho_max(d={d},p={p:.6g})")


def rank_deficient_min_model(
    d: int, branch: int, p: float, eps: float = DEFAULT_EPSILON
) -> StatModel:
    """Full GMM model at the classical state with ``branch - 1`` weights ``p``.

    The remaining weight ``1 - (branch-1) p`` sits on level ``branch - 1``;
    ``p`` must lie in ``[1/branch, 1/(branch-1)]``.  The state is mixed with
    ``eps * 1_d/d`` so that it has full rank.
    """
    if not 2 <= branch <= d:
        raise InvalidModelError(f"branch must lie in 2..{d}")
    lo, hi = 1.0 / branch, 1.0 / (branch - 1)
    if not lo - 1e-12 <= p <= hi + 1e-12:
        raise InvalidModelError(f"p must lie in [{lo:.6g}, {hi:.6g}] for branch {branch}")
    diag = np.zeros(d)
    diag[: branch - 1] = p
    diag[branch - 1] = 1.0 - (branch - 1) * p
    rho = regularize(np.diag(diag), eps)
    return full_model_at(rho, label=f"rho_min{branch}(d={d},p={p:.6g})")


MAX_TENSOR_DIM = 16


def tensor_copies(model: StatModel, k: int) -> StatModel:
    """Model of ``k`` copies: ``rho^(x)k`` with product-rule derivatives."""
    if k < 1:
        raise InvalidModelError("k must be at least 1")
    if k == 1:
        return model
    if model.dim**k > MAX_TENSOR_DIM:
        raise InvalidModelError(f"{k} copies of a d={model.dim} model exceed the size budget")
    rho = linalg.kron_all([model.rho] * k)
    derivs = []
    for dj in model.derivs:
        total = np.zeros_like(rho)
        for i in range(k):
            factors = [model.rho] * k
            factors[i] = dj
            total = total + linalg.kron_all(factors)
        derivs.append(total)
    return StatModel(
        rho=rho,
        derivs=np.array(derivs),
        weight=model.weight,
        theta_star=model.theta_star,
        label=f"{model.label}^{k}",
    )


def purity(model: StatModel | npt.ArrayLike) -> float:
    """``Tr(rho^2)``."""
    rho = model.rho if isinstance(model, StatModel) else np.asarray(model)
    return float(np.vdot(rho, rho).real)


def solve_lub(model: StatModel) -> LubFamily:
    """Locally-unbiased operators: ``Tr(rho X_j) = theta_j``, ``Tr(D_k X_j) = delta_jk``.

    The particular solution has minimum Frobenius norm; the null basis is
    orthonormal in the stacked Hilbert-Schmidt inner product.
    """
    d, n = model.dim, model.n_params
    frame = linalg._vec_frame(d)  # orthonormal Hermitian basis, d^2 elements
    # constraint rows act on the real coordinate vector of a single X_j
    rows = np.vstack([[linalg.herm_basis_vec(model.rho, d)], [linalg.herm_basis_vec(x, d) for x in model.derivs]])
    u, s, vt = np.linalg.svd(rows)
    rank = int(np.sum(s > 1e-10 * s[0]))
    pinv = np.linalg.pinv(rows, rcond=1e-12)
    particular = np.empty((n, d, d), dtype=complex)
    for j in range(n):
        rhs = np.zeros(n + 1)
        rhs[0] = model.theta_star[j]
        rhs[j + 1] = 1.0
        coords = pinv @ rhs
        if np.max(np.abs(rows @ coords - rhs)) > LUB_TOL:
            raise InvalidModelError("unbiasedness constraints are inconsistent")
        particular[j] = np.einsum("k,kab->ab", coords, frame)
    null_single = vt[rank:]  # (d^2 - rank, d^2)
    null_ops = np.einsum("ik,kab->iab", null_single, frame)
    count = null_ops.shape[0]
    null_basis = np.zeros((n * count, n, d, d), dtype=complex)
    for j in range(n):
        null_basis[j * count : (j + 1) * count, j] = null_ops
    return LubFamily(particular=particular, null_basis=null_basis)


def lub_residual(model: StatModel, ops: npt.ArrayLike) -> float:
    """Max violation of the unbiasedness constraints for an operator tuple."""
    x = np.asarray(ops)
    means = np.einsum("ab,jba->j", model.rho, x).real
    cross = np.einsum("kab,jba->jk", model.derivs, x).real
    return float(
        max(np.max(np.abs(means - model.theta_star)), np.max(np.abs(cross - np.eye(model.n_params))))
    )


def encode_matrix(m: npt.ArrayLike) -> list[list[list[float]]]:
    a = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(obj: Any, d: int, what: str) -> npt.NDArray[np.complex128]:
    arr = np.asarray(obj, dtype=float)
    if arr.shape == (d, d, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.shape == (d, d):
        return arr.astype(complex)
    raise InvalidModelError(f"{what} must be a {d}x{d} matrix of [re, im] pairs, got shape {arr.shape}")


def model_from_dict(obj: dict[str, Any]) -> StatModel:
    """Build and validate a model from the JSON mapping produced by ``to_dict``."""
    try:
        d = int(obj["d"])
        rho = decode_matrix(obj["rho"], d, "rho")
        derivs_raw = obj["derivs"]
    except KeyError as exc:
        raise InvalidModelError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise InvalidModelError(f"malformed model: {exc}") from exc
    derivs = np.array([decode_matrix(x, d, f"derivs[{i}]") for i, x in enumerate(derivs_raw)])
    n = derivs.shape[0]
    if "n" in obj and int(obj["n"]) != n:
        raise InvalidModelError(f"n = {obj['n']} does not match {n} derivatives")
    weight = obj.get("weight")
    theta = obj.get("theta_star")
    return make_model(
        rho,
        derivs,
        weight=None if weight is None else np.asarray(weight, dtype=float),
        theta_star=None if theta is None else np.asarray(theta, dtype=float),
        label=str(obj.get("label", "")),
    )


def load_model(path: str | Path) -> StatModel:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidModelError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(obj)


def save_model(model: StatModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1)
