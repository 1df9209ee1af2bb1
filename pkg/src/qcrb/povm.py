"""POVMs on a qudit: SIC construction, classical Fisher information and search.

SIC POVMs are built as Weyl-Heisenberg orbits ``{D_ab |psi>}`` of a fiducial
vector with ``D_ab = X^a Z^b`` (shift ``X``, clock ``Z``).  Fiducials for
``d = 2, 3`` are exact; for ``d = 4..8`` they are read from
``data/sic_fiducials.json`` and polished on load.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.optimize as so

from . import linalg
from .errors import InvalidModelError, SingularInformationError, UnsupportedDimensionError
from .model import StatModel, decode_matrix, encode_matrix

PROB_FLOOR = 1e-12
CLOSURE_TOL = 1e-10
PSD_TOL = 1e-10
SIC_OVERLAP_TOL = 1e-9
FIDUCIAL_TOL = 1e-12
SIC_DIMS = range(2, 9)
IC_COND_LIMIT = 1e12
DEFAULT_RESTARTS = 8


class ProbabilityFloorWarning(UserWarning):
    """Some outcomes fell below the probability floor and were dropped."""


@dataclass(frozen=True)
class Povm:
    """Finite POVM ``{Pi_l}`` stored as an ``(m, d, d)`` read-only array."""

    elements: npt.NDArray[np.complex128] = field(repr=False)
    label: str = ""

    def __post_init__(self) -> None:
        el = np.array(self.elements, dtype=complex)
        if el.ndim != 3 or el.shape[1] != el.shape[2] or el.shape[0] < 1:
            raise InvalidModelError(f"POVM elements must have shape (m, d, d), got {el.shape}")
        for k, e in enumerate(el):
            if not linalg.is_hermitian(e, tol=1e-10):
                raise InvalidModelError(f"POVM element {k} is not Hermitian")
        el = 0.5 * (el + el.conj().transpose(0, 2, 1))
        for k, e in enumerate(el):
            lo = linalg.min_eig(e)
            if lo < -PSD_TOL:
                raise InvalidModelError(f"POVM element {k} is not PSD (min eig {lo:.3e})")
        dev = float(np.max(np.abs(el.sum(axis=0) - np.eye(el.shape[1]))))
        if dev > CLOSURE_TOL:
            raise InvalidModelError(f"POVM elements do not sum to identity (deviation {dev:.3e})")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    def probabilities(self, rho: npt.ArrayLike) -> npt.NDArray[np.float64]:
        return np.einsum("ab,lba->l", np.asarray(rho), self.elements).real

    def permuted(self, order: npt.ArrayLike) -> "Povm":
        return Povm(self.elements[np.asarray(order)], self.label)

    def rotated(self, unitary: npt.ArrayLike) -> "Povm":
        """``{U Pi_l U^dagger}``."""
        u = np.asarray(unitary, dtype=complex)
        return Povm(u @ self.elements @ u.conj().T, self.label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "d": self.dim,
            "m": self.n_outcomes,
            "label": self.label,
            "elements": [encode_matrix(e) for e in self.elements],
        }


@dataclass(frozen=True)
class SicPovm(Povm):
    """Rank-one SIC POVM ``Pi_l = |psi_l><psi_l| / d`` on the Weyl-Heisenberg orbit."""

    fiducial: npt.NDArray[np.complex128] = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        super().__post_init__()
        d = self.dim
        if self.n_outcomes != d * d:
            raise InvalidModelError(f"a SIC POVM in d={d} has {d * d} elements, got {self.n_outcomes}")
        dev = overlap_deviation(self)
        if dev > SIC_OVERLAP_TOL:
            raise InvalidModelError(f"pairwise overlaps deviate from 1/(d^2(d+1)) by {dev:.3e}")


def povm_from_dict(obj: dict[str, Any]) -> Povm:
    try:
        d = int(obj["d"])
        raw = obj["elements"]
    except KeyError as exc:
        raise InvalidModelError(f"missing field {exc.args[0]!r}") from exc
    els = np.array([decode_matrix(e, d, f"elements[{k}]") for k, e in enumerate(raw)])
    return Povm(els, str(obj.get("label", "")))


def load_povm(path: str | Path) -> Povm:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidModelError(f"POVM file is not valid JSON: {exc}") from exc
    return povm_from_dict(obj)


def save_povm(povm: Povm, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(povm.to_dict(), fh, indent=1)


def basis_povm(d: int) -> Povm:
    """Projective measurement in the computational basis."""
    return Povm(np.array([np.diag(np.eye(d)[k]).astype(complex) for k in range(d)]), "basis")


# ---------------------------------------------------------------------------
# Weyl-Heisenberg group and SIC fiducials


def clock_shift(d: int) -> tuple[npt.NDArray[np.complex128], npt.NDArray[np.complex128]]:
    """Shift ``X|j> = |j+1>`` and clock ``Z|j> = w^j |j>`` with ``w = exp(2 pi i/d)``."""
    x = np.roll(np.eye(d), 1, axis=0).astype(complex)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return x, z


@lru_cache(maxsize=None)
def _displacements(d: int) -> npt.NDArray[np.complex128]:
    x, z = clock_shift(d)
    ops = [np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) for a in range(d) for b in range(d)]
    arr = np.array(ops)
    arr.setflags(write=False)
    return arr


def wh_orbit(fiducial: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """The ``d^2`` vectors ``X^a Z^b psi`` in row-major ``(a, b)`` order."""
    psi = np.asarray(fiducial, dtype=complex)
    return _displacements(psi.shape[0]) @ psi


def fiducial_residual(fiducial: npt.ArrayLike) -> float:
    """``max |<psi|D_ab|psi>|^2 - 1/(d+1)|`` over non-identity displacements."""
    return float(np.max(np.abs(_fiducial_terms(_normalize(np.asarray(fiducial, dtype=complex))))))


def _normalize(psi: npt.NDArray) -> npt.NDArray:
    return psi / np.linalg.norm(psi)


def _fiducial_terms(psi: npt.NDArray) -> npt.NDArray[np.float64]:
    d = psi.shape[0]
    amps = _displacements(d)[1:] @ psi @ psi.conj()
    return np.abs(amps) ** 2 - 1.0 / (d + 1)


def _split(v: npt.NDArray) -> npt.NDArray[np.complex128]:
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


def _frame_potential(v: npt.NDArray) -> float:
    psi = _split(v)
    psi = psi / np.linalg.norm(psi)
    amps = _displacements(psi.shape[0]) @ psi @ psi.conj()
    return float(np.sum(np.abs(amps) ** 4))


def polish_fiducial(fiducial: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """Drive the overlap residuals to zero by nonlinear least squares."""
    psi = _normalize(np.asarray(fiducial, dtype=complex))
    res = so.least_squares(
        lambda v: _fiducial_terms(_normalize(_split(v))),
        np.concatenate([psi.real, psi.imag]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        method="lm",
    )
    out = _normalize(_split(res.x))
    return out * np.exp(-1j * np.angle(out[np.argmax(np.abs(out))]))


def find_sic_fiducial(d: int, seed: int = 0, restarts: int = 20) -> tuple[npt.NDArray[np.complex128], float]:
    """Search for a Weyl-Heisenberg SIC fiducial by frame-potential minimization.

    The frame potential ``sum_ab |<psi|D_ab|psi>|^4`` attains its minimum
    ``2d/(d+1)`` exactly at SIC fiducials.  Returns ``(fiducial, residual)``
    for the best restart.
    """
    if d < 2:
        raise UnsupportedDimensionError(f"no SIC search for d={d}")
    rng = np.random.default_rng(seed)
    target = 2.0 * d / (d + 1)
    best: tuple[float, npt.NDArray] | None = None
    for _ in range(restarts):
        res = so.minimize(_frame_potential, rng.normal(size=2 * d), method="BFGS", options={"gtol": 1e-12})
        if res.fun - target > 1e-6:
            continue
        psi = polish_fiducial(_split(res.x))
        r = fiducial_residual(psi)
        if best is None or r < best[0]:
            best = (r, psi)
        if r <= FIDUCIAL_TOL:
            break
    if best is None:
        raise UnsupportedDimensionError(f"no SIC fiducial found for d={d} in {restarts} restarts")
    return best[1], best[0]


def fiducial_table(dims=range(4, 9), restarts: int = 40) -> dict[str, Any]:
    """Fiducial data file contents; restart seeds are fixed to ``d``."""
    rows = []
    for d in dims:
        psi, r = find_sic_fiducial(d, seed=d, restarts=restarts)
        rows.append({"d": d, "seed": d, "residual": r, "amplitudes": [[z.real, z.imag] for z in psi]})
    return {"fiducials": rows}


def _exact_fiducial(d: int) -> npt.NDArray[np.complex128] | None:
    if d == 2:
        c = np.sqrt((1 + 1 / np.sqrt(3)) / 2)
        s = np.sqrt((1 - 1 / np.sqrt(3)) / 2)
        return np.array([c, np.exp(1j * np.pi / 4) * s])
    if d == 3:
        return np.array([0.0, 1.0, -1.0], dtype=complex) / np.sqrt(2)
    return None


@lru_cache(maxsize=1)
def _shipped_fiducials() -> dict[int, dict[str, Any]]:
    text = resources.files("qcrb").joinpath("data/sic_fiducials.json").read_text(encoding="utf-8")
    return {int(e["d"]): e for e in json.loads(text)["fiducials"]}


def sic_fiducial(d: int) -> npt.NDArray[np.complex128]:
    """Fiducial vector for ``d in 2..8`` with overlap residual at most ``1e-12``."""
    if not isinstance(d, (int, np.integer)) or int(d) not in SIC_DIMS:
        raise UnsupportedDimensionError(f"SIC POVMs are available for d in 2..8, got {d!r}")
    d = int(d)
    exact = _exact_fiducial(d)
    if exact is not None:
        return exact
    entry = _shipped_fiducials()[d]
    psi = np.array([complex(re, im) for re, im in entry["amplitudes"]])
    if fiducial_residual(psi) > FIDUCIAL_TOL:
        psi = polish_fiducial(psi)
    return _normalize(psi)


@lru_cache(maxsize=None)
def sic_povm(d: int) -> SicPovm:
    """Weyl-Heisenberg covariant SIC POVM for ``d in 2..8``."""
    psi = sic_fiducial(d)
    vecs = wh_orbit(psi)
    els = np.einsum("la,lb->lab", vecs, vecs.conj()) / d
    fid = psi.copy()
    fid.setflags(write=False)
    return SicPovm(els, f"sic-{d}", fiducial=fid)


def pairwise_overlaps(povm: Povm) -> npt.NDArray[np.float64]:
    """Sorted ``Tr(Pi_a Pi_b)`` over unordered pairs ``a < b``."""
    el = povm.elements
    gram = np.einsum("aij,bji->ab", el, el).real
    iu = np.triu_indices(el.shape[0], k=1)
    return np.sort(gram[iu])


def overlap_deviation(povm: Povm) -> float:
    """Largest deviation of a pairwise overlap from ``1/(d^2(d+1))``."""
    d = povm.dim
    return float(np.max(np.abs(pairwise_overlaps(povm) - 1.0 / (d * d * (d + 1)))))


# ---------------------------------------------------------------------------
# classical Fisher information


def cfi_with_drops(
    model: StatModel, povm: Povm, prob_floor: float = PROB_FLOOR
) -> tuple[npt.NDArray[np.float64], int]:
    """Classical Fisher information and the number of outcomes below ``prob_floor``."""
    if povm.dim != model.dim:
        raise InvalidModelError(f"POVM dimension {povm.dim} does not match model dimension {model.dim}")
    p = povm.probabilities(model.rho)
    keep = p > prob_floor
    if not np.any(keep):
        raise SingularInformationError("every outcome probability is below the floor")
    g = np.einsum("jab,lba->jl", np.asarray(model.derivs), povm.elements[keep]).real
    j = (g / p[keep]) @ g.T
    return 0.5 * (j + j.T), int(np.count_nonzero(~keep))


def cfi(model: StatModel, povm: Povm, prob_floor: float = PROB_FLOOR) -> npt.NDArray[np.float64]:
    """``J_jk = sum_l Tr(d_j rho Pi_l) Tr(d_k rho Pi_l) / Tr(rho Pi_l)``."""
    j, dropped = cfi_with_drops(model, povm, prob_floor)
    if dropped:
        warnings.warn(f"{dropped} outcome(s) below probability floor {prob_floor:g} dropped", ProbabilityFloorWarning, stacklevel=2)
    return j


def _check_ic(j: npt.NDArray) -> None:
    w = np.linalg.eigvalsh(j)
    if w[-1] <= 0 or w[0] <= w[-1] / IC_COND_LIMIT:
        raise SingularInformationError(
            f"classical Fisher information is singular (eigenvalues {w[0]:.3e}..{w[-1]:.3e}); "
            "the POVM is not informationally complete for this model"
        )


def classical_crb(model: StatModel, povm: Povm, prob_floor: float = PROB_FLOOR):
    """``Tr[W J^-1]`` for the given measurement."""
    from .bounds import BoundReport

    j, dropped = cfi_with_drops(model, povm, prob_floor)
    _check_ic(j)
    val = float(np.trace(np.asarray(model.weight) @ np.linalg.inv(j)))
    return BoundReport(
        "classical",
        val,
        "closed-form",
        residuals={"dropped_outcomes": dropped, "n_outcomes": povm.n_outcomes},
        note=povm.label,
        data={"cfi": j},
    )


def gill_massar_check(model: StatModel, povm: Povm, prob_floor: float = PROB_FLOOR) -> float:
    """``Tr[J_SLD^-1 J]``; at most ``d - 1`` for any single-copy measurement."""
    from .bounds import sld_rld

    j, _ = cfi_with_drops(model, povm, prob_floor)
    return float(np.trace(np.linalg.solve(sld_rld(model).J_sld, j)))


# ---------------------------------------------------------------------------
# local search over rank-one POVMs


@dataclass
class PovmSearchResult:
    povm: Povm
    value: float
    history: list[float]
    status: str
    restart_values: list[float]
    best_restart: int
    seed: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def frame_to_povm(frame: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """``Pi_l = A^{-1/2} v_l v_l^dagger A^{-1/2}`` with ``A = sum_l v_l v_l^dagger``."""
    v = np.asarray(frame, dtype=complex)
    u = v @ linalg.inv_sqrtm_psd(v.T @ v.conj()).T
    return np.einsum("la,lb->lab", u, u.conj())


class _FrameObjective:
    """``Tr[W J^-1]`` and its gradient as a function of the frame vectors."""

    def __init__(self, model: StatModel, m: int) -> None:
        self.rho = np.asarray(model.rho)
        self.derivs = np.asarray(model.derivs)
        self.weight = np.asarray(model.weight)
        self.m = m
        self.d = model.dim

    def _unpack(self, x: npt.NDArray) -> npt.NDArray[np.complex128]:
        return _split(x).reshape(self.m, self.d)

    def __call__(self, x: npt.NDArray) -> tuple[float, npt.NDArray[np.float64]]:
        v = self._unpack(x)
        a = v.T @ v.conj()
        w, q = np.linalg.eigh(a)
        if w[0] <= 1e-14 * w[-1]:
            return np.inf, np.zeros_like(x)
        sw = np.sqrt(w)
        b = (q / sw) @ q.conj().T
        u = v @ b.T  # rows u_l = B v_l
        p = np.einsum("la,ab,lb->l", u.conj(), self.rho, u).real
        g = np.einsum("la,jab,lb->jl", u.conj(), self.derivs, u).real
        if np.min(p) <= 0:
            return np.inf, np.zeros_like(x)
        j = (g / p) @ g.T
        try:
            jinv = np.linalg.inv(j)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(x)
        f = float(np.trace(self.weight @ jinv))
        if not np.isfinite(f) or f <= 0:
            return np.inf, np.zeros_like(x)
        k = jinv @ self.weight @ jinv
        kg = k @ g
        coef = np.einsum("jl,jl->l", g, kg) / p**2
        # df = -sum_l 2 Re(u_l^dagger M_l du_l)
        m_ops = np.einsum("jl,jab->lab", kg / p, self.derivs) * 2.0 - coef[:, None, None] * self.rho
        grad_u = -2.0 * np.einsum("lab,lb->la", m_ops, u)
        # chain rule through B = A^{-1/2}
        h = v.T @ grad_u.conj()
        hp = q.conj().T @ h @ q
        gamma = -1.0 / (np.outer(sw, sw) * (sw[:, None] + sw[None, :]))
        qq = q @ (gamma * hp) @ q.conj().T
        grad_v = grad_u @ b.conj() + v @ (qq + qq.conj().T).T
        return f, np.concatenate([grad_v.real.ravel(), grad_v.imag.ravel()])


def optimize_ic_povm(
    model: StatModel,
    m: int | None = None,
    seed: int = 0,
    iters: int = 2000,
    restarts: int = DEFAULT_RESTARTS,
    gtol: float = 1e-10,
) -> PovmSearchResult:
    """Locally minimize ``Tr[W J^-1]`` over rank-one ``m``-outcome POVMs.

    Each restart draws a complex Gaussian frame and runs BFGS with a line
    search on the frame.  The normalization ``A^{-1/2}`` keeps every iterate an
    exact POVM.  The best restart wins; ties go to the lower restart index.
    """
    d = model.dim
    m = d * d if m is None else int(m)
    if m < model.n_params + 1:
        raise InvalidModelError(f"{m} outcomes cannot resolve {model.n_params} parameters")
    obj = _FrameObjective(model, m)
    runs = []
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        rng = np.random.default_rng(child)
        history: list[float] = []
        x0 = rng.normal(size=2 * m * d)
        res = so.minimize(
            obj,
            x0,
            jac=True,
            method="BFGS",
            options={"maxiter": iters, "gtol": gtol},
            callback=lambda xk, h=history: h.append(obj(xk)[0]),
        )
        runs.append((float(res.fun), r, res, history))
    values = [run[0] for run in runs]
    val, r, res, history = min(runs, key=lambda t: (t[0], t[1]))
    if not np.isfinite(val):
        raise SingularInformationError("no restart reached an informationally complete POVM")
    povm = Povm(frame_to_povm(obj._unpack(res.x)), "optimized")
    # BFGS flags precision loss at a flat optimum; accept it when the gradient is small
    small_grad = float(np.max(np.abs(res.jac))) <= 1e-6 * max(1.0, val)
    if res.success or small_grad:
        status = "converged"
    else:
        status = "max-iterations" if res.nit >= iters else "stalled"
    return PovmSearchResult(povm, val, history, status, values, r, seed)
