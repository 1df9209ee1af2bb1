import numpy as np
import pytest

from qcrb import sdp
from qcrb.errors import SolverError
from qcrb.model import depolarized_plus_model, gmm_model, qubit_model

from conftest import cvx_hcrb, cvx_nhcrb, random_model


def _lambda_max_problem(a: np.ndarray, complex_block: bool) -> sdp.SdpProblem:
    """``max <A, Y>`` over density matrices; optimum is the top eigenvalue."""
    n = a.shape[0]
    pb = sdp.ProblemBuilder([n], [complex_block])
    pb.C[0] = a
    k = pb.new_constraint(1.0)
    pb.add_entries(k, 0, np.arange(n), np.arange(n), np.ones(n))
    return pb.build(maximize=True)


@pytest.mark.parametrize("complex_block", [False, True])
def test_lambda_max(rng, complex_block):
    g = rng.normal(size=(6, 6))
    if complex_block:
        g = g + 1j * rng.normal(size=(6, 6))
    a = g + g.conj().T
    sol = sdp.solve(_lambda_max_problem(a, complex_block))
    assert sol.optimal
    top = np.linalg.eigvalsh(a)[-1]
    assert sol.primal_value == pytest.approx(top, abs=1e-7)
    assert sol.dual_value == pytest.approx(top, abs=1e-7)
    # weak duality, in the maximization sense
    assert sol.primal_value <= sol.dual_value + 1e-9 * (1 + abs(sol.primal_value))


def test_objective_scaling(rng):
    g = rng.normal(size=(5, 5))
    a = g + g.T
    p1 = _lambda_max_problem(a, False)
    p2 = _lambda_max_problem(3.0 * a, False)
    v1, v2 = sdp.solve(p1).primal_value, sdp.solve(p2).primal_value
    assert v2 == pytest.approx(3.0 * v1, rel=1e-7)


def test_embed_real_is_equivalent(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    prob = _lambda_max_problem(g + g.conj().T, True)
    real = sdp.embed_real(prob)
    assert real.complex_blocks == (False,)
    assert sdp.solve(real).primal_value == pytest.approx(sdp.solve(prob).primal_value, abs=1e-7)


def test_problem_validation():
    with pytest.raises(ValueError):
        sdp.ProblemBuilder([2], [False]).build()
    pb = sdp.ProblemBuilder([2], [False])
    pb.new_constraint(1.0)
    with pytest.raises(ValueError):
        pb.add_entries(0, 0, [0], [0], [1j])


def test_infeasible_is_reported():
    # Tr Y = -1 with Y >= 0 has no solution
    pb = sdp.ProblemBuilder([2], [False])
    k = pb.new_constraint(-1.0)
    pb.add_entries(k, 0, [0, 1], [0, 1], [1.0, 1.0])
    pb.C[0] = np.eye(2)
    try:
        sol = sdp.solve(pb.build())
    except SolverError:
        return
    assert not sol.usable


def test_dump_triplets(tmp_path, rng):
    prob = _lambda_max_problem(np.diag([1.0, 2.0]), False)
    path = tmp_path / "p.txt"
    sdp.dump_triplets(prob, path)
    lines = path.read_text().splitlines()
    assert lines[:3] == ["# blocks 2", "# complex 0", "# sense max"]
    assert "b 1 1" in lines


@pytest.mark.parametrize("d,n", [(2, 2), (3, 3), (3, 8), (4, 3)])
def test_nhcrb_hcrb_match_conic_oracle(rng, d, n):
    m = random_model(d, n, rng)
    nh = sdp.build_nhcrb(m)
    h = sdp.build_hcrb(m)
    snh, sh = sdp.solve(nh.problem), sdp.solve(h.problem)
    assert snh.usable and sh.usable
    assert nh.value(snh) - m.theta_correction == pytest.approx(cvx_nhcrb(m), rel=1e-6)
    assert h.value(sh) - m.theta_correction == pytest.approx(cvx_hcrb(m), rel=1e-6)


def test_weighted_models_match_oracle(rng):
    m = random_model(3, 4, rng, weight=True)
    nh = sdp.build_nhcrb(m)
    assert nh.value(sdp.solve(nh.problem)) - m.theta_correction == pytest.approx(cvx_nhcrb(m), rel=1e-6)


def test_scaled_and_unscaled_agree(rng):
    m = random_model(3, 5, rng)
    a = sdp.build_nhcrb(m, scaled=True)
    b = sdp.build_nhcrb(m, scaled=False)
    assert a.value(sdp.solve(a.problem)) == pytest.approx(b.value(sdp.solve(b.problem)), rel=1e-7)


def test_real_reduction_agrees():
    m = gmm_model(3)
    assert sdp.real_parities(m) is not None
    full = sdp.build_nhcrb(m, reduce=False)
    red = sdp.build_nhcrb(m, reduce=True)
    assert red.problem.block_dims[0] < full.problem.block_dims[0] * 2
    assert red.value(sdp.solve(red.problem)) == pytest.approx(full.value(sdp.solve(full.problem)), rel=1e-7)


def test_reduce_refused_without_real_structure(rng):
    m = random_model(3, 3, rng)
    if sdp.real_parities(m) is None:
        with pytest.raises(ValueError):
            sdp.build_nhcrb(m, reduce=True)


def test_operators_are_locally_unbiased():
    m = qubit_model([0.2, 0.1, 0.3])
    prog = sdp.build_nhcrb(m)
    L, X = sdp.nhcrb_operators(prog, sdp.solve(prog.problem))
    for j in range(3):
        for k in range(3):
            assert np.trace(m.derivs[k] @ X[j]).real == pytest.approx(float(j == k), abs=1e-7)


def test_near_pure_regularization_converges():
    m = depolarized_plus_model(3, 1.0, eps=1e-8)
    for build in (sdp.build_nhcrb, sdp.build_hcrb):
        prog = build(m)
        assert sdp.solve(prog.problem).usable


def test_extract_estimator_recovers_operators():
    from qcrb.gellmann import gmm_basis
    from qcrb.povm import sic_povm

    lam = gmm_basis(2).matrices
    xi, res = sdp.extract_estimator(lam, sic_povm(2).elements)
    assert res <= 1e-10
    assert xi.shape == (3, 4)
