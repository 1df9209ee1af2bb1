"""Precision-bound catalog for multiparameter qudit models.

Closed forms (SLD, RLD, Gill-Massar), SDP-backed Holevo and Nagaoka-Hayashi
bounds, purity-linear inequalities for full-parameter models, exact
certificates for the maximally mixed state, a commutator-based upper bound on
the Nagaoka-Hayashi bound and an explicit feasible point of the
most-informative individual-measurement program.

All bounds are on the weighted mean-square error ``Tr[W V]`` and are
independent of ``theta_star``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
import numpy.typing as npt

from . import linalg, sdp
from .errors import InvalidModelError, SingularInformationError, SolverError, UnsupportedDimensionError
from .gellmann import gmm_basis
from .model import StatModel, purity, solve_lub

SLD_DENOM_FLOOR = 1e-12
ORDERING_TOL = 1e-6

KINDS = (
    "SLD",
    "RLD",
    "HCRB",
    "NHCRB",
    "GMCRB",
    "NHCRB_upper_commutator",
    "MICRB_upper",
    "HCRB_lower",
    "NHCRB_upper_mm",
    "classical",
)
METHODS = ("closed-form", "sdp", "feasible-point", "inequality")


@dataclass
class BoundReport:
    """One bound value with provenance and diagnostics.

    ``data`` holds optimizer output (operators, solutions) and is not serialized.
    """

    kind: str
    value: float
    method: str
    theta_correction: float = 0.0
    gap: float | None = None
    residuals: dict[str, Any] = field(default_factory=dict)
    note: str = ""
    data: dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not np.isfinite(self.value):
            raise SolverError(f"{self.kind} value is not finite")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.pop("data")
        out["value"] = float(self.value)
        out["residuals"] = {k: _jsonable(v) for k, v in self.residuals.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _jsonable(v: Any) -> Any:
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Fraction):
        return str(v)
    return v


def _is_identity(w: npt.NDArray) -> bool:
    return bool(np.allclose(w, np.eye(w.shape[0]), atol=1e-14, rtol=0))


def _weight_note(model: StatModel) -> str:
    return "" if _is_identity(model.weight) else "weighted trace form"


# ---------------------------------------------------------------------------
# logarithmic derivatives


@dataclass(frozen=True)
class QfiMatrices:
    """SLD and RLD operators with their quantum Fisher information matrices."""

    J_sld: npt.NDArray[np.float64] = field(repr=False)
    J_rld: npt.NDArray[np.complex128] = field(repr=False)
    L_sld: npt.NDArray[np.complex128] = field(repr=False)
    L_rld: npt.NDArray[np.complex128] = field(repr=False)


def sld_operators(model: StatModel) -> npt.NDArray[np.complex128]:
    """Solutions of ``2 d_j rho = L rho + rho L``, computed in the eigenbasis of ``rho``."""
    w, u = linalg.eig_herm(model.rho)
    denom = w[:, None] + w[None, :]
    mask = denom > SLD_DENOM_FLOOR
    out = []
    for dj in model.derivs:
        dj_e = u.conj().T @ dj @ u
        le = np.zeros_like(dj_e)
        le[mask] = 2.0 * dj_e[mask] / denom[mask]
        out.append(u @ le @ u.conj().T)
    return np.array(out)


def sld_rld(model: StatModel) -> QfiMatrices:
    """SLD and RLD operators and QFIs; raises if ``rho`` is singular."""
    w = linalg.eigvals_herm(model.rho)
    if w[0] <= SLD_DENOM_FLOOR:
        raise SingularInformationError(
            f"state is singular (min eigenvalue {w[0]:.3e}); regularize it first"
        )
    L = sld_operators(model)
    J = np.einsum("jab,kba->jk", model.derivs, L).real
    J = 0.5 * (J + J.T)
    rho_inv = np.linalg.inv(model.rho)
    Lr = np.einsum("ab,jbc->jac", rho_inv, model.derivs)
    # J_rld[j,k] = Tr(d_j rho  rho^-1  d_k rho)
    Jr = np.einsum("jab,bc,kca->jk", model.derivs, rho_inv, model.derivs)
    Jr = 0.5 * (Jr + Jr.conj().T)
    return QfiMatrices(J_sld=J, J_rld=Jr, L_sld=L, L_rld=Lr)


def _inv(mat: npt.NDArray, what: str) -> npt.NDArray:
    w = np.linalg.eigvalsh(mat)
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        raise SingularInformationError(f"{what} is singular (min eigenvalue {w[0]:.3e})")
    return np.linalg.inv(mat)


def sld_crb(model: StatModel, qfi: QfiMatrices | None = None) -> BoundReport:
    """``Tr[W J_SLD^-1]``."""
    qfi = qfi or sld_rld(model)
    val = float(np.trace(model.weight @ _inv(qfi.J_sld, "SLD information")))
    return BoundReport("SLD", val, "closed-form", note=_weight_note(model))


def rld_crb(model: StatModel, qfi: QfiMatrices | None = None) -> BoundReport:
    """``Tr[W Re J_RLD^-1] + || sqrt(W) Im J_RLD^-1 sqrt(W) ||_1``."""
    qfi = qfi or sld_rld(model)
    inv = _inv(qfi.J_rld, "RLD information")
    sw = linalg.sqrtm_psd(model.weight).real
    im = sw @ inv.imag @ sw
    val = float(np.trace(model.weight @ inv.real) + linalg.trace_norm(1j * im))
    return BoundReport("RLD", val, "closed-form", note=_weight_note(model))


def gmcrb(model: StatModel, copies: int = 1, qfi: QfiMatrices | None = None) -> BoundReport:
    """Gill-Massar bound ``(Tr (sqrt(W) J^-1 sqrt(W))^(1/2))^2 / (k (d-1))``.

    For ``W = 1`` this is ``(Tr J^(-1/2))^2 / (k (d-1))``; ``k`` counts
    independent copies of the model measured one at a time.
    """
    if copies < 1:
        raise ValueError("copies must be at least 1")
    qfi = qfi or sld_rld(model)
    inv = _inv(qfi.J_sld, "SLD information")
    sw = linalg.sqrtm_psd(model.weight).real
    root = linalg.sqrtm_psd(sw @ inv @ sw).real
    val = float(np.trace(root) ** 2 / (copies * (model.dim - 1)))
    return BoundReport("GMCRB", val, "closed-form", residuals={"copies": copies}, note=_weight_note(model))


# ---------------------------------------------------------------------------
# SDP bounds


def _objective_scale(model: StatModel) -> float:
    """Factor that brings small bounds to order one.

    The solver's gap test is absolute below unit objective, so tiny bounds
    would otherwise lose relative accuracy.
    """
    try:
        ref = sld_crb(model).value
    except SingularInformationError:
        return 1.0
    return 1.0 / ref if 0.0 < ref < 1.0 else 1.0


def _sdp_report(
    kind: str, model: StatModel, prog: sdp.LmiProgram, sol: sdp.SdpSolution, scale: float = 1.0
) -> BoundReport:
    if not sol.usable:
        raise SolverError(
            f"{kind} solve ended with status {sol.status} after {sol.iterations} iterations "
            f"(gap {sol.gap:.2e}, pinf {sol.primal_infeasibility:.2e}, dinf {sol.dual_infeasibility:.2e})"
        )
    return BoundReport(
        kind,
        prog.value(sol) / scale,
        "sdp",
        theta_correction=model.theta_correction,
        gap=float(sol.gap),
        residuals={
            "iterations": sol.iterations,
            "primal_infeasibility": sol.primal_infeasibility,
            "dual_infeasibility": sol.dual_infeasibility,
            "primal_side_value": prog.primal_side_value(sol) / scale,
            "objective_scale": scale,
            "seconds": sol.seconds,
            "status": sol.status,
        },
        data={"program": prog, "solution": sol},
    )


def hcrb(model: StatModel, opts: sdp.SdpOptions | None = None) -> BoundReport:
    """Holevo bound via SDP; ``data['X']`` holds the optimal LUB operators."""
    scale = _objective_scale(model)
    prog = sdp.build_hcrb(model.with_weight(scale * model.weight))
    sol = sdp.solve(prog.problem, opts)
    rep = _sdp_report("HCRB", model, prog, sol, scale)
    V, X = sdp.hcrb_operators(prog, sol)
    rep.data.update(V=V, X=X)
    return rep


def nhcrb(model: StatModel, opts: sdp.SdpOptions | None = None, reduce: bool | None = None) -> BoundReport:
    """Nagaoka-Hayashi bound via SDP; ``data['L']`` and ``data['X']`` hold the optimizer."""
    scale = _objective_scale(model)
    prog = sdp.build_nhcrb(model.with_weight(scale * model.weight), reduce=reduce)
    sol = sdp.solve(prog.problem, opts)
    rep = _sdp_report("NHCRB", model, prog, sol, scale)
    L, X = sdp.nhcrb_operators(prog, sol)
    rep.data.update(L=L, X=X)
    rep.residuals["real_reduced"] = not prog.layout["complex"]
    return rep


def sld_lub_operators(model: StatModel, qfi: QfiMatrices | None = None) -> npt.NDArray[np.complex128]:
    """Locally unbiased operators ``X_j = theta_j + sum_k (J^-1)_jk L_k`` built from the SLDs."""
    qfi = qfi or sld_rld(model)
    inv = _inv(qfi.J_sld, "SLD information")
    X = np.einsum("jk,kab->jab", inv, qfi.L_sld)
    return X + model.theta_star[:, None, None] * np.eye(model.dim)[None]


def nhcrb_upper_commutator(model: StatModel, X: npt.ArrayLike | None = None) -> BoundReport:
    """``Tr Re Z[X] + sum_{j<k} || sqrt(rho) [X_j, X_k] sqrt(rho) ||_1`` at a locally unbiased ``X``.

    The weight is absorbed as ``X -> sqrt(W) X``.  By default ``X`` is the
    SLD choice, for which the first term is the SLD bound.  The report also
    carries ``n`` times the SLD bound in ``residuals['n_sld']``.
    """
    qfi = sld_rld(model)
    ops = sld_lub_operators(model, qfi) if X is None else np.asarray(X, dtype=complex)
    lub_res = float(np.max(np.abs(_lub_conditions(model, ops))))
    if lub_res > 1e-8:
        raise InvalidModelError(f"operators are not locally unbiased (residual {lub_res:.3e})")
    sw = linalg.sqrtm_psd(model.weight).real
    shifted = ops - model.theta_star[:, None, None] * np.eye(model.dim)[None]
    Y = np.einsum("ij,jab->iab", sw, shifted)
    sq = linalg.sqrtm_psd(model.rho)
    z = np.einsum("ab,jbc,kca->jk", model.rho, Y, Y)
    comm = 0.0
    n = model.n_params
    for j in range(n):
        for k in range(j + 1, n):
            c = Y[j] @ Y[k] - Y[k] @ Y[j]
            comm += linalg.trace_norm(sq @ c @ sq)
    val = float(np.trace(z).real + comm)
    sld_val = sld_crb(model, qfi).value
    return BoundReport(
        "NHCRB_upper_commutator",
        val,
        "inequality",
        theta_correction=model.theta_correction,
        residuals={"commutator_term": comm, "holevo_term": float(np.trace(z).real), "n_sld": n * sld_val},
    )


def _lub_conditions(model: StatModel, ops: npt.NDArray) -> npt.NDArray:
    means = np.einsum("ab,jba->j", model.rho, ops).real - model.theta_star
    grads = np.einsum("kab,jba->jk", model.derivs, ops).real - np.eye(model.n_params)
    return np.concatenate([means, grads.ravel()])


# ---------------------------------------------------------------------------
# closed forms


@dataclass(frozen=True)
class MaximallyMixedValues:
    """Exact bounds at the maximally mixed state for ``n`` GMM parameters."""

    hcrb: Fraction
    nhcrb_upper: Fraction
    exact_full: tuple[Fraction, Fraction]

    @property
    def ratio_upper(self) -> Fraction:
        return self.nhcrb_upper / self.hcrb


def analytic_mm(d: int, n: int | None = None) -> MaximallyMixedValues:
    """``HCRB = n/d`` and ``NHCRB <= n(d+1)/d``, with equality for all ``d^2 - 1`` parameters."""
    nmax = d * d - 1
    n = nmax if n is None else n
    if not 1 <= n <= nmax:
        raise ValueError(f"n must lie in 1..{nmax}")
    full = (Fraction(nmax, d), Fraction(nmax * (d + 1), d))
    return MaximallyMixedValues(Fraction(n, d), Fraction(n * (d + 1), d), full)


def analytic_rho_max(d: int, p: float) -> tuple[float, float]:
    """Holevo and Nagaoka-Hayashi values at ``p |+><+| + (1-p) 1/d`` for the full GMM model."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    h = (d * d - 1) / d + p * (d - 1) - (d - 1) * p * p / d
    nh = (
        (d * d + 1) / 2
        - (d * d - 4 * d + 5) * p * p / 2
        + (d**3 + 2 * d * d - 3 * d - 2) / (2 * d) * np.sqrt(max(0.0, 1.0 - p * p))
    )
    return float(h), float(nh)


def qubit_ratio(r: float) -> float:
    """NHCRB/HCRB for the full qubit model at Bloch radius ``r``."""
    if not 0.0 <= r < 1.0:
        raise ValueError("r must lie in [0, 1)")
    return float((5 - r * r + 4 * np.sqrt(1 - r * r)) / (3 - r * r + 2 * r))


def qubit_radius_from_purity(p: float) -> float:
    """Bloch radius ``r = sqrt(2P - 1)`` of a qubit with purity ``P``."""
    return float(np.sqrt(max(0.0, 2.0 * p - 1.0)))


def ratio_cap(d: int, p: float) -> float:
    """Upper bound ``(d^2 + d - 1 - P)/(d - P)`` on NHCRB/HCRB for full models at purity ``P``."""
    return (d * d + d - 1 - p) / (d - p)


def _require_full_onb(model: StatModel) -> None:
    d, n = model.dim, model.n_params
    if n != d * d - 1:
        raise InvalidModelError(f"expected all {d * d - 1} parameters, got {n}")
    gram = np.einsum("jab,kba->jk", model.derivs, model.derivs).real
    if not np.allclose(gram, np.eye(n), atol=1e-9):
        raise InvalidModelError("derivatives are not orthonormal")
    if not _is_identity(model.weight):
        raise InvalidModelError("identity weight required")


def hcrb_lower_purity(model: StatModel) -> BoundReport:
    """``HCRB >= d - P`` for full-parameter orthonormal models."""
    _require_full_onb(model)
    P = purity(model)
    return BoundReport("HCRB_lower", model.dim - P, "inequality", residuals={"purity": P})


def nhcrb_upper_mm(model: StatModel) -> BoundReport:
    """``NHCRB <= d^2 + d - 1 - P`` for full-parameter orthonormal models."""
    _require_full_onb(model)
    d = model.dim
    P = purity(model)
    return BoundReport(
        "NHCRB_upper_mm", d * d + d - 1 - P, "inequality", residuals={"purity": P, "ratio_cap": ratio_cap(d, P)}
    )


# ---------------------------------------------------------------------------
# maximally mixed certificates


def mm_optimal_L(ops: npt.NDArray) -> npt.NDArray[np.complex128]:
    """Blocks ``(d+1)/(d+2) ({l_j, l_k} + delta_jk 1)`` for an orthonormal GMM set."""
    n, d, _ = ops.shape
    prod = np.einsum("jab,kbc->jkac", ops, ops)
    anti = prod + prod.transpose(1, 0, 2, 3)
    eye = np.eye(n)[:, :, None, None] * np.eye(d)[None, None]
    return (d + 1) / (d + 2) * (anti + eye)


@dataclass
class CertificateReport:
    """Outcome of the exact optimality checks at the maximally mixed state."""

    dim: int
    value: Fraction
    checks: dict[str, tuple[bool, float]]

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "d": self.dim,
            "value": str(self.value),
            "value_float": float(self.value),
            "passed": self.passed,
            "checks": {k: {"passed": ok, "residual": r} for k, (ok, r) in self.checks.items()},
        }


def verify_mm_certificates(d: int, tol: float = 1e-9) -> CertificateReport:
    """Check the closed-form primal and dual optimizers of the full NHCRB program at ``1/d``."""
    if not 2 <= d <= 8:
        raise UnsupportedDimensionError(f"certificates are checked for d in 2..8, got {d}")
    lam = gmm_basis(d).matrices
    n = d * d - 1
    exact = Fraction(n * (d + 1), d)
    checks: dict[str, tuple[bool, float]] = {}

    Lb = mm_optimal_L(lam)
    Lstar = linalg.cq_from_blocks(Lb)
    sym = float(np.max(np.abs(Lb - Lb.transpose(1, 0, 2, 3))))
    checks["primal_block_symmetry"] = (sym <= tol, sym)
    outer = linalg.outer_blocks(lam)
    lo = linalg.min_eig(Lstar - outer)
    checks["primal_psd"] = (lo >= -tol, lo)
    primal = float(np.einsum("jjaa->", Lb).real) / d
    checks["primal_value"] = (abs(primal - float(exact)) <= tol * float(exact), abs(primal - float(exact)))

    # dual slack matrix
    nd = n * d
    comm = np.einsum("jab,kbc->jkac", lam, lam)
    comm = comm - comm.transpose(1, 0, 2, 3)
    eye_blocks = np.eye(n)[:, :, None, None] * np.eye(d)[None, None]
    top = linalg.cq_from_blocks((eye_blocks + comm) / d)
    col = -(d + 1) / d * lam.reshape(nd, d)
    slack = np.block([[top, col], [col.conj().T, n * (d + 1) / d**2 * np.eye(d)]])
    lo = linalg.min_eig(slack)
    checks["dual_psd"] = (lo >= -tol, lo)
    g2 = (d + 1) / d * lam
    g3 = -(d * d - 1) * (d + 1) / d**2 * np.eye(d)
    dual = float(2.0 * np.einsum("jab,jba->", g2, lam).real + np.trace(g3).real)
    checks["dual_value"] = (abs(dual - float(exact)) <= tol * float(exact), abs(dual - float(exact)))

    Y = np.block([[Lstar, lam.reshape(nd, d)], [lam.reshape(nd, d).conj().T, np.eye(d)]])
    cs = abs(float(np.vdot(Y, slack).real))
    checks["complementary_slackness"] = (cs <= tol * float(exact), cs)

    prod = np.einsum("jab,kbc->jkac", lam, lam)
    m1 = linalg.cq_from_blocks(prod / (d - 1))
    m2 = linalg.cq_from_blocks(prod.transpose(1, 0, 2, 3))
    big_m = np.eye(nd) - (m1 + m2)
    n1 = m2
    n2 = linalg.cq_from_blocks(prod / (d + 1))
    big_n = np.eye(nd) + n1 - n2
    for name, mat in (("M_spectrum", big_m), ("N_spectrum", big_n)):
        ev = linalg.eigvals_herm(mat)
        dev = float(np.max(np.minimum(np.abs(ev), np.abs(ev - 2.0))))
        checks[name] = (dev <= tol, dev)
    return CertificateReport(dim=d, value=exact, checks=checks)


# ---------------------------------------------------------------------------
# most-informative feasible point


def xsol_matrix(ops: npt.NDArray) -> npt.NDArray[np.complex128]:
    """``[[1, X_1 .. X_n], [X_j, L*_jk]]`` as a dense ``((n+1)d, (n+1)d)`` matrix."""
    n, d, _ = ops.shape
    blocks = np.zeros((n + 1, n + 1, d, d), dtype=complex)
    blocks[0, 0] = np.eye(d)
    blocks[0, 1:] = ops
    blocks[1:, 0] = ops
    blocks[1:, 1:] = mm_optimal_L(ops)
    return linalg.cq_from_blocks(blocks)


def micrb_feasible(model: StatModel, tol: float = 1e-10) -> BoundReport:
    """Upper bound on the most-informative bound from the explicit feasible point.

    Valid for identity-weight full models with orthonormal linear derivatives,
    where ``rho = 1/d + sum theta_j d_j rho``.  Value ``n(d+1)/d - |theta|^2``.
    """
    _require_full_onb(model)
    d, n = model.dim, model.n_params
    lam = np.array(model.derivs)
    th = model.theta_star
    lin = np.eye(d) / d + np.einsum("j,jab->ab", th, lam)
    if np.max(np.abs(lin - model.rho)) > 1e-9:
        raise InvalidModelError("state is not 1/d + sum theta_j d_j rho")
    X = solve_lub(model).particular
    xs = xsol_matrix(X)
    blocks = linalg.cq_blocks(xs, n + 1, d)
    c1 = float(np.max(np.abs(blocks[0, 0] - np.eye(d))))
    c2 = float(np.max(np.abs(_lub_conditions(model, blocks[0, 1:]))))
    lo = linalg.min_eig(xs)
    val = sum(float(np.trace(model.rho @ blocks[1 + j, 1 + j]).real) for j in range(n)) - model.theta_correction
    ok = c1 <= tol and c2 <= tol and lo >= -tol
    if not ok:
        raise SolverError(f"feasible point check failed (C1 {c1:.2e}, C2 {c2:.2e}, min eig {lo:.2e})")
    return BoundReport(
        "MICRB_upper",
        val,
        "feasible-point",
        theta_correction=model.theta_correction,
        residuals={"c1": c1, "c2": c2, "min_eig": lo},
        data={"xsol": xs},
    )


@dataclass
class SeparableReport:
    dim: int
    xi: npt.NDArray[np.float64] = field(repr=False)
    estimator_residual: float
    reconstruction_residual: float
    min_xi_block_eig: float
    min_povm_eig: float

    @property
    def passed(self) -> bool:
        return self.reconstruction_residual <= 1e-8 and self.min_xi_block_eig >= -1e-10 and self.min_povm_eig >= -1e-10


def verify_xsol_separable(d: int, povm_elements: npt.ArrayLike | None = None) -> SeparableReport:
    """Decompose the feasible point as ``sum_l Xi_l (x) Pi_l`` with rank-1 ``Xi_l``.

    Uses the SIC POVM for ``d`` when no POVM is given.
    """
    if povm_elements is None:
        from .povm import sic_povm

        povm_elements = sic_povm(d).elements
    pi = np.asarray(povm_elements)
    lam = gmm_basis(d).matrices
    n = lam.shape[0]
    xi, res = sdp.extract_estimator(lam, pi)
    vecs = np.vstack([np.ones(pi.shape[0]), xi])  # (n+1, m)
    recon = np.zeros(((n + 1) * d, (n + 1) * d), dtype=complex)
    min_xi = np.inf
    for l in range(pi.shape[0]):
        big_xi = np.outer(vecs[:, l], vecs[:, l])
        min_xi = min(min_xi, linalg.min_eig(big_xi))
        recon += np.kron(big_xi, pi[l])
    target = xsol_matrix(lam)
    return SeparableReport(
        dim=d,
        xi=xi,
        estimator_residual=res,
        reconstruction_residual=float(np.max(np.abs(recon - target))),
        min_xi_block_eig=float(min_xi),
        min_povm_eig=float(min(linalg.min_eig(p) for p in pi)),
    )


# ---------------------------------------------------------------------------
# convenience


def all_bounds(model: StatModel, opts: sdp.SdpOptions | None = None) -> dict[str, BoundReport]:
    """SLD, RLD, GMCRB, HCRB and NHCRB, plus the feasible-point bound when it applies."""
    qfi = sld_rld(model)
    out = {
        "SLD": sld_crb(model, qfi),
        "RLD": rld_crb(model, qfi),
        "GMCRB": gmcrb(model, qfi=qfi),
        "HCRB": hcrb(model, opts),
        "NHCRB": nhcrb(model, opts),
    }
    try:
        out["MICRB_upper"] = micrb_feasible(model)
    except InvalidModelError:
        pass
    return out


def ordering_violation(reports: dict[str, BoundReport]) -> float:
    """Largest violation of ``max(SLD, RLD) <= HCRB <= NHCRB (<= MICRB_upper)``."""
    v = reports
    worst = max(v["SLD"].value, v["RLD"].value) - v["HCRB"].value
    worst = max(worst, v["HCRB"].value - v["NHCRB"].value)
    if "MICRB_upper" in v:
        worst = max(worst, v["NHCRB"].value - v["MICRB_upper"].value)
    return float(worst)
