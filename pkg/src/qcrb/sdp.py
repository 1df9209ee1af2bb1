"""Primal-dual interior-point solver for block semidefinite programs.

Standard form::

    minimize    <C, Y>
    subject to  <A_k, Y> = b_k      k = 1..m
                Y = diag(Y_1, ..., Y_B) >= 0

with dual ``maximize b.y  s.t.  C - sum_k y_k A_k >= 0``.  Each block is either
real symmetric or complex Hermitian; the inner product is ``Re Tr(A^dagger Y)``.
The method is infeasible-start path following with Nesterov-Todd scaling and
Mehrotra's predictor-corrector, solving a dense Schur complement each step.

The module also assembles the Holevo and Nagaoka-Hayashi programs of a
:class:`~qcrb.model.StatModel` in linear-matrix-inequality form
``min c.x  s.t.  F_0 + sum_k x_k F_k >= 0``, which is the dual side of the
standard form with ``C = F_0``, ``A_k = -F_k`` and ``b = -c``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla
import scipy.sparse as sp

from . import linalg
from .errors import SolverError
from .model import LubFamily, StatModel, solve_lub

OPTIMAL = "optimal"
MAX_ITER = "max-iterations"
INFEASIBLE = "infeasible-detected"
NEAR_OPTIMAL = "near-optimal"

_SCHUR_CHUNK_BUDGET = 4_000_000


# ---------------------------------------------------------------------------
# problem and solution types


@dataclass(frozen=True)
class SdpProblem:
    """Block SDP in standard form.

    ``A[b]`` is a sparse ``(m, N_b * N_b)`` matrix whose row ``k`` holds the
    full (both triangles) row-major entries of ``A_k`` restricted to block
    ``b``.  ``complex_blocks[b]`` selects Hermitian over real symmetric.
    """

    block_dims: tuple[int, ...]
    complex_blocks: tuple[bool, ...]
    C: tuple[npt.NDArray, ...] = field(repr=False)
    A: tuple[sp.csr_matrix, ...] = field(repr=False)
    b: npt.NDArray[np.float64] = field(repr=False)
    maximize: bool = False

    def __post_init__(self) -> None:
        if not (len(self.block_dims) == len(self.complex_blocks) == len(self.C) == len(self.A)):
            raise ValueError("block descriptors have inconsistent lengths")
        m = self.b.shape[0]
        if m < 1:
            raise ValueError("at least one constraint is required")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("right-hand side is not finite")
        for nb, c, a in zip(self.block_dims, self.C, self.A):
            if c.shape != (nb, nb) or a.shape != (m, nb * nb):
                raise ValueError("block data has the wrong shape")
            if np.max(np.abs(c - c.conj().T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(c), initial=0.0)):
                raise ValueError("objective block is not Hermitian")

    @property
    def n_constraints(self) -> int:
        return self.b.shape[0]

    def constraint_matrix(self, k: int) -> list[npt.NDArray]:
        """Dense blocks of ``A_k`` (for debugging and small cross-checks)."""
        return [a[k].toarray().reshape(nb, nb) for nb, a in zip(self.block_dims, self.A)]

    def apply(self, Y: Sequence[npt.ArrayLike]) -> npt.NDArray[np.float64]:
        """``(<A_k, Y>)_k``."""
        out = np.zeros(self.n_constraints)
        for a, y in zip(self.A, Y):
            out += (a.conj() @ np.asarray(y).ravel()).real
        return out

    def objective(self, Y: Sequence[npt.ArrayLike]) -> float:
        return float(sum(np.vdot(c, np.asarray(y)).real for c, y in zip(self.C, Y)))


@dataclass(frozen=True)
class SdpOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    near_tol: float = 1e-6
    stall_iter: int = 30
    step_fraction: float = 0.98
    verbose: bool = False


@dataclass
class SdpSolution:
    """Result of :func:`solve`; values refer to the problem as posed (``maximize`` honored)."""

    primal_value: float
    dual_value: float
    Y: list[npt.NDArray] = field(repr=False)
    y: npt.NDArray[np.float64] = field(repr=False)
    S: list[npt.NDArray] = field(repr=False)
    gap: float
    primal_infeasibility: float
    dual_infeasibility: float
    iterations: int
    status: str
    seconds: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def usable(self) -> bool:
        """Optimal, or stopped early within the looser ``near_tol``."""
        return self.status in (OPTIMAL, NEAR_OPTIMAL)


# ---------------------------------------------------------------------------
# builder


class ProblemBuilder:
    """Accumulates sparse Hermitian constraint matrices entry by entry."""

    def __init__(self, block_dims: Sequence[int], complex_blocks: Sequence[bool]):
        self.block_dims = tuple(int(n) for n in block_dims)
        self.complex_blocks = tuple(bool(c) for c in complex_blocks)
        self.C = [np.zeros((n, n), dtype=complex if c else float) for n, c in zip(self.block_dims, self.complex_blocks)]
        self._rows: list[list[npt.NDArray]] = [[] for _ in self.block_dims]
        self._cols: list[list[npt.NDArray]] = [[] for _ in self.block_dims]
        self._vals: list[list[npt.NDArray]] = [[] for _ in self.block_dims]
        self.b: list[float] = []

    def new_constraint(self, rhs: float) -> int:
        self.b.append(float(rhs))
        return len(self.b) - 1

    def add_entries(self, k: int, block: int, i: npt.ArrayLike, j: npt.ArrayLike, v: npt.ArrayLike) -> None:
        """Add raw full-matrix entries; the caller supplies both triangles."""
        n = self.block_dims[block]
        ii = np.atleast_1d(np.asarray(i, dtype=np.int64))
        jj = np.atleast_1d(np.asarray(j, dtype=np.int64))
        vv = np.atleast_1d(np.asarray(v))
        if not self.complex_blocks[block]:
            if np.any(np.abs(np.imag(vv)) > 0):
                raise ValueError("complex entry in a real block")
            vv = np.real(vv)
        self._rows[block].append(np.full(ii.shape, k, dtype=np.int64))
        self._cols[block].append(ii * n + jj)
        self._vals[block].append(vv)

    def add_dense(self, k: int, block: int, mat: npt.ArrayLike, row0: int = 0, col0: int = 0) -> None:
        """Place a dense sub-matrix and its Hermitian mirror (if off the diagonal)."""
        m = np.asarray(mat)
        nz = np.nonzero(np.abs(m) > 0)
        if nz[0].size == 0:
            return
        vals = m[nz]
        self.add_entries(k, block, nz[0] + row0, nz[1] + col0, vals)
        if row0 != col0:
            self.add_entries(k, block, nz[1] + col0, nz[0] + row0, np.conj(vals))

    def build(self, maximize: bool = False) -> SdpProblem:
        m = len(self.b)
        mats = []
        for blk, n in enumerate(self.block_dims):
            dtype = complex if self.complex_blocks[blk] else float
            if self._rows[blk]:
                rows = np.concatenate(self._rows[blk])
                cols = np.concatenate(self._cols[blk])
                vals = np.concatenate(self._vals[blk]).astype(dtype)
            else:
                rows = cols = np.zeros(0, dtype=np.int64)
                vals = np.zeros(0, dtype=dtype)
            a = sp.coo_matrix((vals, (rows, cols)), shape=(m, n * n)).tocsr()
            a.sum_duplicates()
            a.eliminate_zeros()
            mats.append(a)
        C = tuple(0.5 * (c + c.conj().T) for c in self.C)
        return SdpProblem(
            block_dims=self.block_dims,
            complex_blocks=self.complex_blocks,
            C=C,
            A=tuple(mats),
            b=np.array(self.b, dtype=float),
            maximize=maximize,
        )


# ---------------------------------------------------------------------------
# solver internals


class _Block:
    """Per-block operator data: forward map, adjoint and Schur-complement plan."""

    def __init__(self, n: int, cplx: bool, a: sp.csr_matrix, scale: npt.NDArray):
        self.n = n
        self.cplx = cplx
        self.dtype = complex if cplx else float
        a = sp.diags(scale) @ a
        a = a.tocsr()
        self.A = a
        self.AH = a.conj().tocsr()
        self.AT = a.T.tocsr()
        nnz = np.diff(a.indptr)
        rows = np.nonzero(nnz)[0]
        order = rows[np.argsort(nnz[rows], kind="stable")]
        chunk = max(1, _SCHUR_CHUNK_BUDGET // (n * n))
        self.plan = []
        for start in range(0, order.size, chunk):
            rr = order[start : start + chunk]
            t = int(nnz[rr].max())
            p = np.zeros((rr.size, t), dtype=np.int64)
            q = np.zeros((rr.size, t), dtype=np.int64)
            v = np.zeros((rr.size, t), dtype=self.dtype)
            for i, r in enumerate(rr):
                lo, hi = a.indptr[r], a.indptr[r + 1]
                cols = a.indices[lo:hi]
                p[i, : hi - lo] = cols // n
                q[i, : hi - lo] = cols % n
                v[i, : hi - lo] = a.data[lo:hi]
            self.plan.append((rr, p, q, v))

    def apply(self, x: npt.NDArray) -> npt.NDArray[np.float64]:
        return (self.AH @ x.ravel()).real

    def adjoint(self, y: npt.NDArray) -> npt.NDArray:
        return (self.AT @ y).reshape(self.n, self.n)

    def schur_add(self, w: npt.NDArray, out: npt.NDArray) -> None:
        n = self.n
        for rr, p, q, v in self.plan:
            left = np.moveaxis(w[:, p], 0, 1) * v[:, None, :]
            right = w[q, :]
            h = np.matmul(left, right)
            out[:, rr] += (self.AH @ h.reshape(rr.size, n * n).T).real


def _herm(x: npt.NDArray) -> npt.NDArray:
    return 0.5 * (x + x.conj().T)


def _max_step(linv: npt.NDArray, dx: npt.NDArray) -> float:
    """Largest ``alpha`` with ``L L^H + alpha dX >= 0`` given ``L^-1`` (``inf`` if unbounded)."""
    t = linv @ dx @ linv.conj().T
    lo = np.linalg.eigvalsh(_herm(t))[0]
    return np.inf if lo >= 0 else -1.0 / lo


def _factor(x: npt.NDArray) -> tuple[npt.NDArray, npt.NDArray]:
    """A factor ``L`` with ``X = L L^H`` and its inverse.

    Cholesky first; an eigendecomposition with clipped eigenvalues when the
    iterate is too ill-conditioned for it.
    """
    try:
        lx = np.linalg.cholesky(x)
        return lx, sla.solve_triangular(lx, np.eye(x.shape[0]), lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    w, u = np.linalg.eigh(x)
    if w[-1] <= 0:
        raise SolverError("iterate lost positive definiteness")
    w = np.maximum(w, 1e-15 * w[-1])
    return u * np.sqrt(w), (u / np.sqrt(w)).conj().T


def _nt_scaling(lx: npt.NDArray, lx_inv: npt.NDArray, ls: npt.NDArray):
    """Return ``G`` (with ``W = G G^H``), ``G^{-1}`` and the scaled eigenvalues ``lam``."""
    _, sv, vh = np.linalg.svd(ls.conj().T @ lx)
    g = (lx @ vh.conj().T) / np.sqrt(sv)
    ginv = (np.sqrt(sv)[:, None] * vh) @ lx_inv
    return g, ginv, sv


def _solve_schur(factor, mat: npt.NDArray, rhs: npt.NDArray) -> npt.NDArray:
    if factor is not None:
        sol = sla.cho_solve(factor, rhs, check_finite=False)
        # one step of iterative refinement
        sol += sla.cho_solve(factor, rhs - mat @ sol, check_finite=False)
        return sol
    return np.linalg.lstsq(mat, rhs, rcond=None)[0]


def _factor_schur(mat: npt.NDArray):
    try:
        return sla.cho_factor(mat, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    reg = 1e-13 * max(1.0, float(np.max(np.diag(mat))))
    try:
        return sla.cho_factor(mat + reg * np.eye(mat.shape[0]), lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None


@dataclass
class _Iterate:
    X: list
    y: npt.NDArray
    S: list
    pobj: float
    dobj: float
    rel_gap: float
    pinf: float
    dinf: float
    it: int

    @property
    def merit(self) -> float:
        return max(self.rel_gap, self.pinf, self.dinf)


def solve(problem: SdpProblem, opts: SdpOptions | None = None) -> SdpSolution:
    """Solve a block SDP.

    Returns status ``optimal`` when all tolerances are met.  If the iteration
    breaks down numerically after the best iterate already meets the looser
    ``near_tol``, that iterate is returned with status ``near-optimal``;
    otherwise :class:`SolverError` is raised.
    """
    opts = opts or SdpOptions()
    t0 = time.perf_counter()
    sign = -1.0 if problem.maximize else 1.0
    m = problem.n_constraints

    # row scaling of constraints
    row_norm = np.zeros(m)
    for a in problem.A:
        row_norm += np.asarray(abs(a).power(2).sum(axis=1)).ravel()
    row_norm = np.sqrt(row_norm)
    if np.any(row_norm == 0):
        bad = int(np.nonzero(row_norm == 0)[0][0])
        if problem.b[bad] != 0:
            raise SolverError(f"constraint {bad} is empty with nonzero right-hand side")
        row_norm[row_norm == 0] = 1.0
    scale = 1.0 / row_norm
    b = problem.b * scale
    blocks = [_Block(n, c, a, scale) for n, c, a in zip(problem.block_dims, problem.complex_blocks, problem.A)]
    C = [sign * np.asarray(c, dtype=blk.dtype) for c, blk in zip(problem.C, blocks)]
    nu = float(sum(problem.block_dims))

    # starting point
    X, S = [], []
    for blk, c in zip(blocks, C):
        n = blk.n
        anorm = np.sqrt(np.asarray(abs(blk.A).power(2).sum(axis=1)).ravel())
        zeta = max(10.0, np.sqrt(n), n * float(np.max((1.0 + np.abs(b)) / (1.0 + anorm))))
        eta = max(10.0, np.sqrt(n), float(np.linalg.norm(c)), float(anorm.max(initial=0.0)))
        X.append(zeta * np.eye(n, dtype=blk.dtype))
        S.append(eta * np.eye(n, dtype=blk.dtype))
    y = np.zeros(m)

    b_norm = 1.0 + float(np.linalg.norm(b))
    c_norm = 1.0 + float(np.sqrt(sum(np.linalg.norm(c) ** 2 for c in C)))
    status = MAX_ITER
    best: _Iterate | None = None
    stall = 0
    last_step = 1.0
    failure = ""
    for it in range(1, opts.max_iter + 1):
        ax = sum(blk.apply(x) for blk, x in zip(blocks, X))
        rp = b - ax
        aty = [blk.adjoint(y) for blk in blocks]
        Rd = [_herm(c - s - t) for c, s, t in zip(C, S, aty)]
        pobj = float(sum(np.vdot(c, x).real for c, x in zip(C, X)))
        dobj = float(b @ y)
        pinf = float(np.linalg.norm(rp)) / b_norm
        dinf = float(np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd))) / c_norm
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        cur = _Iterate(X, y, S, pobj, dobj, rel_gap, pinf, dinf, it)
        if opts.verbose:
            print(f"{it:3d} p={pobj: .10e} d={dobj: .10e} gap={rel_gap:.2e} pinf={pinf:.2e} dinf={dinf:.2e}")
        if best is None or cur.merit < 0.9 * best.merit:
            stall = 0
        else:
            stall += 1
        if best is None or cur.merit < best.merit:
            best = cur
        if rel_gap <= opts.gap_tol and pinf <= opts.feas_tol and dinf <= opts.feas_tol:
            status = OPTIMAL
            break
        if np.abs(y).max(initial=0.0) > 1e12 * max(1.0, abs(dobj)) or max(np.abs(x).max() for x in X) > 1e14:
            status = INFEASIBLE
            break
        if stall >= opts.stall_iter:
            failure = "no progress"
            break
        mu = float(sum(np.vdot(x, s).real for x, s in zip(X, S))) / nu
        if mu <= 0:
            failure = "complementarity became non-positive"
            break

        try:
            fx = [_factor(x) for x in X]
            fs = [_factor(s) for s in S]
            scal = [_nt_scaling(lx, lxi, ls) for (lx, lxi), (ls, _) in zip(fx, fs)]
        except (SolverError, np.linalg.LinAlgError) as exc:
            failure = str(exc)
            break
        Ws = [g @ g.conj().T for g, _, _ in scal]

        M = np.zeros((m, m))
        for blk, w in zip(blocks, Ws):
            blk.schur_add(w, M)
        M = 0.5 * (M + M.T)
        factor = _factor_schur(M)

        wrw = [w @ r @ w for w, r in zip(Ws, Rd)]

        def direction(rc_list):
            rhs = rp - sum(blk.apply(rc) for blk, rc in zip(blocks, rc_list)) + sum(
                blk.apply(t) for blk, t in zip(blocks, wrw)
            )
            dy = _solve_schur(factor, M, rhs)
            dS = [_herm(r - blk.adjoint(dy)) for r, blk in zip(Rd, blocks)]
            dX = [_herm(rc - w @ ds @ w) for rc, w, ds in zip(rc_list, Ws, dS)]
            return dX, dy, dS

        def rc_from(rt_list):
            out = []
            for (g, _, lam), rt in zip(scal, rt_list):
                dmat = 2.0 * rt / (lam[:, None] + lam[None, :])
                out.append(_herm(g @ dmat @ g.conj().T))
            return out

        # predictor
        rt_aff = [-np.diag(lam**2).astype(blk.dtype) for (_, _, lam), blk in zip(scal, blocks)]
        dX_a, dy_a, dS_a = direction(rc_from(rt_aff))
        ap = min(1.0, min(_max_step(lxi, dx) for (_, lxi), dx in zip(fx, dX_a)))
        ad = min(1.0, min(_max_step(lsi, ds) for (_, lsi), ds in zip(fs, dS_a)))
        mu_aff = float(
            sum(np.vdot(x + ap * dx, s + ad * ds).real for x, dx, s, ds in zip(X, dX_a, S, dS_a))
        ) / nu
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))
        if last_step < 0.2:
            # re-center after a short step instead of pushing toward the boundary
            sigma = max(sigma, 0.5)

        # corrector
        rt = []
        for (g, ginv, lam), dx, ds, blk in zip(scal, dX_a, dS_a, blocks):
            dxt = ginv @ dx @ ginv.conj().T
            dst = g.conj().T @ ds @ g
            corr = 0.5 * (dxt @ dst + dst @ dxt)
            rt.append(sigma * mu * np.eye(blk.n) - np.diag(lam**2) - corr)
        dX, dy, dS = direction(rc_from(rt))
        if not np.all(np.isfinite(dy)):
            failure = "non-finite search direction"
            break

        ap = min(_max_step(lxi, dx) for (_, lxi), dx in zip(fx, dX))
        ad = min(_max_step(lsi, ds) for (_, lsi), ds in zip(fs, dS))
        gamma = max(0.9, min(opts.step_fraction, 1.0 - 10.0 * max(mu / (1.0 + abs(pobj)), 1e-16)))
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        last_step = min(ap, ad)
        if opts.verbose:
            print(f"      ap={ap:.3e} ad={ad:.3e} sigma={sigma:.2e} mu={mu:.3e}")
        if ap < 1e-10 and ad < 1e-10:
            failure = "step length collapsed"
            break
        X = [_herm(x + ap * dx) for x, dx in zip(X, dX)]
        y = y + ad * dy
        S = [_herm(s + ad * ds) for s, ds in zip(S, dS)]

    if status != OPTIMAL and status != INFEASIBLE and best is not None:
        if best.rel_gap <= opts.near_tol and best.pinf <= opts.near_tol and best.dinf <= opts.near_tol:
            status = NEAR_OPTIMAL
            cur = best
        elif failure:
            raise SolverError(
                f"{failure} at iteration {cur.it} (best gap {best.rel_gap:.2e}, "
                f"pinf {best.pinf:.2e}, dinf {best.dinf:.2e})"
            )
    return SdpSolution(
        primal_value=sign * cur.pobj,
        dual_value=sign * cur.dobj,
        Y=[np.array(x) for x in cur.X],
        y=cur.y * scale,
        S=[np.array(s) for s in cur.S],
        gap=abs(cur.pobj - cur.dobj) / (1.0 + abs(cur.pobj)),
        primal_infeasibility=cur.pinf,
        dual_infeasibility=cur.dinf,
        iterations=cur.it,
        status=status,
        seconds=time.perf_counter() - t0,
    )


def embed_real(problem: SdpProblem) -> SdpProblem:
    """Equivalent problem with every Hermitian block replaced by its real embedding.

    Coefficients are halved so that ``<embed(A), embed(Y)>/2 = Re Tr(A Y)``.
    """
    m = problem.n_constraints
    dims, Cs, As = [], [], []
    for n, cplx, c, a in zip(problem.block_dims, problem.complex_blocks, problem.C, problem.A):
        if not cplx:
            dims.append(n)
            Cs.append(c)
            As.append(a)
            continue
        dims.append(2 * n)
        Cs.append(0.5 * linalg.herm_to_real_embed(c))
        coo = a.tocoo()
        k, idx, v = coo.row, coo.col, coo.data
        i, j = idx // n, idx % n
        n2 = 2 * n
        rows = np.concatenate([k, k, k, k])
        ii = np.concatenate([i, i, i + n, i + n])
        jj = np.concatenate([j, j + n, j, j + n])
        vals = 0.5 * np.concatenate([v.real, -v.imag, v.imag, v.real])
        As.append(sp.coo_matrix((vals, (rows, ii * n2 + jj)), shape=(m, n2 * n2)).tocsr())
    return SdpProblem(
        block_dims=tuple(dims),
        complex_blocks=tuple(False for _ in dims),
        C=tuple(Cs),
        A=tuple(As),
        b=problem.b.copy(),
        maximize=problem.maximize,
    )


def dump_triplets(problem: SdpProblem, path: str | Path) -> None:
    """Write a plain-text sparse dump: header, then ``kind k block i j re im`` lines.

    ``kind`` is ``C`` for the objective (``k = 0``) or ``A`` for constraint ``k``
    (1-based); a ``b k value`` line gives each right-hand side.  Only the upper
    triangle is written.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# blocks {' '.join(map(str, problem.block_dims))}\n")
        fh.write(f"# complex {' '.join('1' if c else '0' for c in problem.complex_blocks)}\n")
        fh.write(f"# sense {'max' if problem.maximize else 'min'}\n")
        for blk, c in enumerate(problem.C):
            ii, jj = np.nonzero(np.triu(np.abs(c) > 0))
            for i, j in zip(ii, jj):
                z = complex(c[i, j])
                fh.write(f"C 0 {blk + 1} {i + 1} {j + 1} {z.real:.17g} {z.imag:.17g}\n")
        for blk, (n, a) in enumerate(zip(problem.block_dims, problem.A)):
            coo = a.tocoo()
            for k, idx, v in zip(coo.row, coo.col, coo.data):
                i, j = divmod(int(idx), n)
                if i <= j:
                    z = complex(v)
                    fh.write(f"A {k + 1} {blk + 1} {i + 1} {j + 1} {z.real:.17g} {z.imag:.17g}\n")
        for k, v in enumerate(problem.b):
            fh.write(f"b {k + 1} {v:.17g}\n")


# ---------------------------------------------------------------------------
# Holevo / Nagaoka-Hayashi program assembly


@dataclass
class LmiProgram:
    """``min c.x + offset  s.t.  F_0 + sum x_k F_k >= 0`` stored as a standard-form problem."""

    problem: SdpProblem
    offset: float
    kind: str
    n_params: int
    dim: int
    layout: dict = field(default_factory=dict, repr=False)

    def value(self, sol: SdpSolution) -> float:
        """Bound value from the LMI (dual) side, ``c.x + offset``."""
        return -sol.dual_value + self.offset

    def primal_side_value(self, sol: SdpSolution) -> float:
        return -sol.primal_value + self.offset


def _herm_entry_basis(d: int, kind: str) -> list[tuple[npt.NDArray, npt.NDArray, npt.NDArray]]:
    """Orthonormal sparse bases as ``(rows, cols, values)`` triples.

    ``kind``: ``'herm'`` (complex Hermitian, ``d^2`` elements), ``'sym'`` (real
    symmetric) or ``'anti'`` (real antisymmetric).
    """
    s = 1.0 / np.sqrt(2.0)
    out = []
    if kind in ("herm", "sym"):
        for a in range(d):
            out.append((np.array([a]), np.array([a]), np.array([1.0 + 0j])))
        for a in range(d):
            for b in range(a + 1, d):
                out.append((np.array([a, b]), np.array([b, a]), np.array([s, s], dtype=complex)))
    if kind == "herm":
        for a in range(d):
            for b in range(a + 1, d):
                out.append((np.array([a, b]), np.array([b, a]), np.array([1j * s, -1j * s])))
    if kind == "anti":
        for a in range(d):
            for b in range(a + 1, d):
                out.append((np.array([a, b]), np.array([b, a]), np.array([s, -s], dtype=complex)))
    return out


def real_parities(model: StatModel, tol: float = 1e-12) -> npt.NDArray[np.int64] | None:
    """Parity signs when the model is real up to per-parameter factors of ``i``.

    Returns ``s`` with ``s_j = +1`` for a real derivative and ``-1`` for a purely
    imaginary one, provided ``rho`` is real, ``W_jk = 0`` whenever ``s_j != s_k``
    and ``theta_j = 0`` whenever ``s_j = -1``.  Otherwise ``None``.
    """
    if np.max(np.abs(model.rho.imag)) > tol:
        return None
    s = np.zeros(model.n_params, dtype=np.int64)
    for j, dj in enumerate(model.derivs):
        if np.max(np.abs(dj.imag)) <= tol:
            s[j] = 1
        elif np.max(np.abs(dj.real)) <= tol:
            s[j] = -1
        else:
            return None
    mixed = s[:, None] != s[None, :]
    if np.any(np.abs(model.weight[mixed]) > tol):
        return None
    if np.any(np.abs(model.theta_star[s < 0]) > tol):
        return None
    return s


def _parity_fixed(lub: LubFamily, s: npt.NDArray) -> tuple[npt.NDArray, npt.NDArray]:
    """Restrict an LUB family to tuples with ``X_j = s_j conj(X_j)``."""

    def proj(ops: npt.NDArray) -> npt.NDArray:
        return 0.5 * (ops + s[:, None, None] * ops.conj())

    part = proj(lub.particular)
    if lub.unique:
        return part, lub.null_basis
    cand = np.array([proj(nb) for nb in lub.null_basis])
    flat = np.concatenate([cand.real.reshape(len(cand), -1), cand.imag.reshape(len(cand), -1)], axis=1)
    u, sv, vt = np.linalg.svd(flat, full_matrices=False)
    rank = int(np.sum(sv > 1e-9 * max(1.0, sv[0])))
    half = flat.shape[1] // 2
    vecs = vt[:rank]
    ops = (vecs[:, :half] + 1j * vecs[:, half:]).reshape((rank,) + lub.particular.shape)
    return part, ops


def build_nhcrb(
    model: StatModel, lub: LubFamily | None = None, reduce: bool | None = None, scaled: bool = True
) -> LmiProgram:
    """Nagaoka-Hayashi program: ``min Tr[(W (x) rho) L]`` over block-symmetric ``L``
    with ``[[L, X], [X^dagger, 1]] >= 0`` and ``X`` locally unbiased.

    When the model is real up to parameter phases (see :func:`real_parities`)
    and ``reduce`` is not ``False``, an equivalent real program of half the
    size is assembled instead.

    With ``scaled`` the program is posed for ``L' = s L s`` and ``X' = s X s``
    with ``s = sqrt(rho)``, i.e. ``[[L', X'], [X'^dagger, rho]] >= 0`` and
    objective ``sum_jk W_jk Tr L'_kj``.  The congruence leaves the optimum
    unchanged and keeps ``L'`` bounded when ``rho`` is nearly singular.
    """
    lub = lub or solve_lub(model)
    n, d = model.n_params, model.dim
    parity = real_parities(model) if reduce is not False else None
    if reduce and parity is None:
        raise ValueError("model has no real structure to reduce")
    if parity is not None:
        part, null = _parity_fixed(lub, parity)
        phase = np.where(parity > 0, 1.0 + 0j, -1j)
        part = (phase[:, None, None] * part).real.astype(complex)
        null = (phase[None, :, None, None] * null).real.astype(complex) if null.shape[0] else null
        cplx = False
    else:
        part, null = lub.particular, lub.null_basis
        parity = np.ones(n, dtype=np.int64)
        cplx = True
    N = (n + 1) * d
    pb = ProblemBuilder([N], [cplx])
    rho = model.rho.real if not cplx else model.rho
    W = model.weight
    if scaled:
        sq = linalg.sqrtm_psd(model.rho)
        sq = sq if cplx else sq.real
        part_f = np.einsum("ab,jbc,cd->jad", sq, part, sq)
        null_f = np.einsum("ab,ijbc,cd->ijad", sq, null, sq) if null.shape[0] else null
        corner, metric = rho, np.eye(d)
    else:
        part_f, null_f = part, null
        corner, metric = np.eye(d), rho
    # F_0 = [[0, X0], [X0^dagger, corner]]
    F0 = np.zeros((N, N), dtype=complex)
    for j in range(n):
        F0[j * d : (j + 1) * d, n * d :] = part_f[j]
        F0[n * d :, j * d : (j + 1) * d] = part_f[j].conj().T
    F0[n * d :, n * d :] = corner
    pb.C[0] = F0 if cplx else F0.real
    coords = []
    for j in range(n):
        for k in range(j, n):
            kind = "herm" if cplx else ("sym" if parity[j] * parity[k] > 0 else "anti")
            for rows, cols, vals in _herm_entry_basis(d, kind):
                bmat = np.zeros((d, d), dtype=complex)
                bmat[rows, cols] = vals
                if j == k:
                    cost = W[j, j] * np.trace(metric @ bmat).real
                else:
                    cost = 2.0 * W[j, k] * np.trace(metric @ bmat).real
                idx = pb.new_constraint(cost)
                ent = vals if cplx else vals.real
                pb.add_entries(idx, 0, rows + j * d, cols + k * d, ent)
                if j != k:
                    pb.add_entries(idx, 0, cols + k * d, rows + j * d, np.conj(ent))
                coords.append((j, k, kind, rows, cols, vals))
    n_l = len(coords)
    for nb in null_f:
        idx = pb.new_constraint(0.0)
        for j in range(n):
            pb.add_dense(idx, 0, nb[j] if cplx else nb[j].real, row0=j * d, col0=n * d)
    prob = _negate_constraints(pb)
    unscale = np.linalg.inv(linalg.sqrtm_psd(model.rho)) if scaled else np.eye(d)
    return LmiProgram(
        problem=prob,
        offset=-model.theta_correction,
        kind="NHCRB",
        n_params=n,
        dim=d,
        layout={
            "coords": coords,
            "n_l": n_l,
            "null": null,
            "part": part,
            "parity": parity,
            "complex": cplx,
            "unscale": unscale,
        },
    )


def _negate_constraints(pb: ProblemBuilder) -> SdpProblem:
    """Turn accumulated ``(F_k, c_k)`` pairs into ``A_k = -F_k``, ``b_k = -c_k``."""
    pb.b = [-v for v in pb.b]
    for blk in range(len(pb.block_dims)):
        pb._vals[blk] = [-v for v in pb._vals[blk]]
    return pb.build()


def nhcrb_operators(prog: LmiProgram, sol: SdpSolution) -> tuple[npt.NDArray, npt.NDArray]:
    """Recover ``(L, X)`` in the original complex frame from a solved program.

    ``L`` is returned as an ``(n, n, d, d)`` block array, ``X`` as ``(n, d, d)``.
    """
    lay = prog.layout
    n, d = prog.n_params, prog.dim
    x = sol.y
    Lb = np.zeros((n, n, d, d), dtype=complex)
    for val, (j, k, kind, rows, cols, vals) in zip(x[: lay["n_l"]], lay["coords"]):
        Lb[j, k][rows, cols] += val * vals
        if j != k:
            Lb[k, j][cols, rows] += val * np.conj(vals)
    u = lay["unscale"]
    Lb = np.einsum("ab,jkbc,cd->jkad", u, Lb, u)
    X = np.array(lay["part"], dtype=complex)
    for val, nb in zip(x[lay["n_l"] :], lay["null"]):
        X = X + val * nb
    if not lay["complex"]:
        phase = np.where(lay["parity"] > 0, 1.0 + 0j, 1j)
        X = phase[:, None, None] * X
        Lb = phase[:, None, None, None] * np.conj(phase)[None, :, None, None] * Lb
    return Lb, X


def build_hcrb(model: StatModel, lub: LubFamily | None = None) -> LmiProgram:
    """Holevo program: ``min Tr[W V]`` over real symmetric ``V`` with
    ``[[V, R], [R^dagger, 1]] >= 0``, ``R_j = vec(sqrt(rho) X_j)``, ``X`` locally unbiased."""
    lub = lub or solve_lub(model)
    n, d = model.n_params, model.dim
    sq = linalg.sqrtm_psd(model.rho)
    N = n + d * d
    pb = ProblemBuilder([N], [True])
    F0 = np.zeros((N, N), dtype=complex)
    R0 = np.array([(sq @ x).ravel() for x in lub.particular])
    F0[:n, n:] = R0
    F0[n:, :n] = R0.conj().T
    F0[n:, n:] = np.eye(d * d)
    pb.C[0] = F0
    W = model.weight
    s = 1.0 / np.sqrt(2.0)
    coords = []
    for j in range(n):
        for k in range(j, n):
            if j == k:
                idx = pb.new_constraint(W[j, j])
                pb.add_entries(idx, 0, [j], [j], [1.0])
            else:
                idx = pb.new_constraint(2.0 * s * W[j, k])
                pb.add_entries(idx, 0, [j, k], [k, j], [s, s])
            coords.append((j, k))
    for nb in lub.null_basis:
        idx = pb.new_constraint(0.0)
        R = np.array([(sq @ x).ravel() for x in nb])
        pb.add_dense(idx, 0, R, row0=0, col0=n)
    prob = _negate_constraints(pb)
    return LmiProgram(
        problem=prob,
        offset=-model.theta_correction,
        kind="HCRB",
        n_params=n,
        dim=d,
        layout={"coords": coords, "null": lub.null_basis, "part": lub.particular},
    )


def hcrb_operators(prog: LmiProgram, sol: SdpSolution) -> tuple[npt.NDArray, npt.NDArray]:
    """Recover ``(V, X)`` from a solved Holevo program."""
    lay = prog.layout
    n = prog.n_params
    ncoord = len(lay["coords"])
    V = np.zeros((n, n))
    s = 1.0 / np.sqrt(2.0)
    for val, (j, k) in zip(sol.y[:ncoord], lay["coords"]):
        if j == k:
            V[j, j] += val
        else:
            V[j, k] += s * val
            V[k, j] += s * val
    X = np.array(lay["part"], dtype=complex)
    for val, nb in zip(sol.y[ncoord:], lay["null"]):
        X = X + val * nb
    return V, X


def extract_estimator(ops: npt.ArrayLike, povm_elements: npt.ArrayLike) -> tuple[npt.NDArray, float]:
    """Least-squares ``xi`` with ``X_j = sum_l xi_jl Pi_l``; returns ``(xi, residual)``."""
    x = np.asarray(ops)
    pi = np.asarray(povm_elements)
    d = pi.shape[1]
    basis = np.array([linalg.herm_basis_vec(p, d) for p in pi]).T  # (d^2, m)
    targets = np.array([linalg.herm_basis_vec(xj, d) for xj in x]).T  # (d^2, n)
    xi, *_ = np.linalg.lstsq(basis, targets, rcond=None)
    xi = xi.T
    recon = np.einsum("jl,lab->jab", xi, pi)
    return xi, float(np.max(np.abs(recon - x)))
