"""Shared fixtures: seeded random models and independent conic-solver oracles."""

from __future__ import annotations

import numpy as np
import pytest

from qcrb.gellmann import gmm_basis
from qcrb.model import StatModel, make_model

_ACCEPTANCE: list[tuple[int, bool, str]] = []


def random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_model(d: int, n: int, rng: np.random.Generator, weight: bool = False) -> StatModel:
    """Ginibre state with ``n`` random GMM-combination derivatives."""
    lam = gmm_basis(d).matrices
    rho = random_state(d, rng)
    c = rng.normal(size=(n, lam.shape[0]))
    w = None
    if weight:
        g = rng.normal(size=(n, n))
        w = g @ g.T + 0.1 * np.eye(n)
    return make_model(rho, np.einsum("jk,kab->jab", c, lam), weight=w)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


def cvx_nhcrb(m: StatModel) -> float:
    """Nagaoka-Hayashi bound through a generic conic solver (test oracle)."""
    cp = pytest.importorskip("cvxpy")
    d, n, rho = m.dim, m.n_params, np.asarray(m.rho)
    L = cp.Variable((n * d, n * d), hermitian=True)
    X = [cp.Variable((d, d), hermitian=True) for _ in range(n)]
    cons = []
    for j in range(n):
        cons.append(cp.real(cp.trace(rho @ X[j])) == m.theta_star[j])
        for k in range(n):
            cons.append(cp.real(cp.trace(m.derivs[k] @ X[j])) == (1.0 if j == k else 0.0))
            if k > j:
                cons.append(L[j * d : (j + 1) * d, k * d : (k + 1) * d] == L[k * d : (k + 1) * d, j * d : (j + 1) * d])
    col = cp.vstack(X)
    cons.append(cp.bmat([[L, col], [col.H, np.eye(d)]]) >> 0)
    obj = sum(
        m.weight[j, k] * cp.real(cp.trace(rho @ L[k * d : (k + 1) * d, j * d : (j + 1) * d]))
        for j in range(n)
        for k in range(n)
    )
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver="CLARABEL")
    return float(prob.value) - m.theta_correction


def cvx_hcrb(m: StatModel) -> float:
    """Holevo bound through a generic conic solver (test oracle)."""
    cp = pytest.importorskip("cvxpy")
    d, n, rho = m.dim, m.n_params, np.asarray(m.rho)
    V = cp.Variable((n, n), symmetric=True)
    X = [cp.Variable((d, d), hermitian=True) for _ in range(n)]
    w, u = np.linalg.eigh(rho)
    sq = (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T
    cons = []
    for j in range(n):
        cons.append(cp.real(cp.trace(rho @ X[j])) == m.theta_star[j])
        for k in range(n):
            cons.append(cp.real(cp.trace(m.derivs[k] @ X[j])) == (1.0 if j == k else 0.0))
    R = cp.vstack([cp.reshape(sq @ X[j], (1, d * d), order="C") for j in range(n)])
    cons.append(cp.bmat([[V, R], [R.H, np.eye(d * d)]]) >> 0)
    prob = cp.Problem(cp.Minimize(cp.trace(m.weight @ V)), cons)
    prob.solve(solver="CLARABEL")
    return float(prob.value) - m.theta_correction


@pytest.fixture
def acceptance():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE.append((number, passed, detail))
        print(f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {detail}")
