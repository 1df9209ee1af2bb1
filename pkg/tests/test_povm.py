import warnings

import numpy as np
import pytest
from scipy.optimize import approx_fprime
from scipy.stats import unitary_group

from qcrb import bounds, povm
from qcrb.errors import InvalidModelError, SingularInformationError
from qcrb.model import depolarized_plus_model, full_model_at, gmm_model, qubit_model

from conftest import random_model, random_state


@pytest.mark.parametrize("d", range(2, 9))
def test_sic_overlaps(d):
    s = povm.sic_povm(d)
    assert s.n_outcomes == d * d
    np.testing.assert_allclose(povm.pairwise_overlaps(s), 1 / (d * d * (d + 1)), atol=1e-12)
    assert povm.fiducial_residual(s.fiducial) < 1e-12


def test_clock_shift_relation():
    x, z = povm.clock_shift(5)
    w = np.exp(2j * np.pi / 5)
    np.testing.assert_allclose(z @ x, w * x @ z, atol=1e-14)
    np.testing.assert_allclose(np.linalg.matrix_power(x, 5), np.eye(5), atol=1e-14)


def test_fiducial_search_and_polish():
    psi, res = povm.find_sic_fiducial(4, seed=4, restarts=10)
    assert res < 1e-12
    polished = povm.polish_fiducial(psi + 1e-6)
    assert povm.fiducial_residual(polished) < 1e-12


def test_povm_validation():
    with pytest.raises(InvalidModelError):
        povm.Povm(np.array([np.eye(2) / 2]))  # does not close
    with pytest.raises(InvalidModelError):
        povm.Povm(np.array([np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])]))  # not PSD
    with pytest.raises(InvalidModelError):
        povm.SicPovm(povm.basis_povm(2).elements)


def test_cfi_matches_multinomial_definition(rng):
    m = random_model(3, 4, rng)
    s = povm.sic_povm(3).rotated(unitary_group.rvs(3, random_state=1))
    p = s.probabilities(m.rho)
    dp = np.array([s.probabilities(dj) for dj in m.derivs])
    np.testing.assert_allclose(povm.cfi(m, s), (dp / p) @ dp.T, atol=1e-12)


def test_cfi_is_invariant_under_relabeling(rng):
    m = random_model(3, 3, rng)
    s = povm.sic_povm(3)
    np.testing.assert_allclose(povm.cfi(m, s.permuted(rng.permutation(9))), povm.cfi(m, s), atol=1e-12)


def test_sic_information_at_maximally_mixed():
    for d in (2, 3):
        j = povm.cfi(gmm_model(d), povm.sic_povm(d))
        np.testing.assert_allclose(j, d / (d + 1) * np.eye(d * d - 1), atol=1e-12)


def test_classical_bound_is_above_nhcrb(rng):
    m = full_model_at(random_state(3, rng))
    assert povm.classical_crb(m, povm.sic_povm(3)).value >= bounds.nhcrb(m).value - 1e-7
    assert povm.gill_massar_check(m, povm.sic_povm(3)) <= 2 + 1e-9


def test_non_ic_measurement_raises():
    with pytest.raises(SingularInformationError):
        povm.classical_crb(qubit_model(0.2), povm.basis_povm(2))


def test_probability_floor_warning():
    m = depolarized_plus_model(2, 1.0, eps=1e-14)
    pure_plus = povm.Povm(
        np.array([[[0.5, 0.5], [0.5, 0.5]], [[0.5, -0.5], [-0.5, 0.5]]], dtype=complex)
    )
    with pytest.warns(povm.ProbabilityFloorWarning):
        povm.cfi(m, pure_plus)
    j, dropped = povm.cfi_with_drops(m, pure_plus)
    assert dropped
    _, none_dropped = povm.cfi_with_drops(m, povm.sic_povm(2))
    assert not none_dropped


def test_frame_to_povm_closes(rng):
    v = rng.normal(size=(7, 3)) + 1j * rng.normal(size=(7, 3))
    el = povm.frame_to_povm(v)
    np.testing.assert_allclose(el.sum(axis=0), np.eye(3), atol=1e-12)
    povm.Povm(el)


def test_objective_gradient_matches_finite_differences(rng):
    m = full_model_at(random_state(2, rng))
    obj = povm._FrameObjective(m, 5)
    x = rng.normal(size=2 * 5 * 2)
    val, grad = obj(x)
    fd = approx_fprime(x, lambda z: obj(z)[0], 1e-7)
    np.testing.assert_allclose(grad, fd, rtol=1e-4, atol=1e-6 * max(1.0, abs(val)))


def test_optimizer_finds_sic_value_for_qubits():
    res = povm.optimize_ic_povm(gmm_model(2), seed=3, restarts=3)
    assert res.value == pytest.approx(4.5, abs=1e-8)
    assert res.converged
    assert len(res.restart_values) == 3


def test_optimizer_is_deterministic():
    m = qubit_model(0.5)
    a = povm.optimize_ic_povm(m, seed=11, restarts=2)
    b = povm.optimize_ic_povm(m, seed=11, restarts=2)
    assert a.value == b.value
    np.testing.assert_array_equal(a.povm.elements, b.povm.elements)


def test_optimizer_never_beats_nhcrb(rng):
    m = full_model_at(random_state(2, rng))
    res = povm.optimize_ic_povm(m, seed=0, restarts=3)
    assert res.value >= bounds.nhcrb(m).value - 1e-7


def test_povm_file_roundtrip(tmp_path):
    s = povm.sic_povm(3)
    path = tmp_path / "sic.json"
    povm.save_povm(s, path)
    back = povm.load_povm(path)
    np.testing.assert_allclose(back.elements, s.elements, atol=1e-15)
    path.write_text("[")
    with pytest.raises(InvalidModelError):
        povm.load_povm(path)
