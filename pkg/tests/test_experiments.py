import json

import numpy as np
import pytest

from qcrb import experiments as ex
from qcrb.errors import InvalidModelError, UnsupportedDimensionError
from qcrb.gellmann import gmm_basis
from qcrb.model import purity


def test_sample_seed_is_stable_and_distinct():
    seeds = [ex.sample_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert ex.sample_seed(7, 3) == seeds[3]
    assert ex.sample_seed(8, 3) != seeds[3]


@pytest.mark.parametrize("sampler", ex.SAMPLERS)
def test_samplers_give_states(sampler):
    rng = np.random.default_rng(0)
    for _ in range(10):
        rho, _ = ex.draw_state(sampler, 3, rng)
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.linalg.eigvalsh(rho)[0] > -1e-12


def test_bloch_sampler_is_uniform_on_the_qubit_ball():
    # accepted Bloch vectors fill the ball of radius sqrt(1/2) in GMM coordinates
    rng = np.random.default_rng(1)
    lam = gmm_basis(2).matrices
    radii = []
    for _ in range(4000):
        rho = ex.bloch_reject_state(2, rng)
        phi = np.einsum("jab,ba->j", lam, rho).real
        radii.append(np.linalg.norm(phi) / np.sqrt(0.5))
    radii = np.array(radii)
    assert radii.max() <= 1.0
    # uniform in a ball: P(r <= 1/2) = 1/8
    assert abs(np.mean(radii <= 0.5) - 0.125) < 0.02


def test_mix_sampler_uses_grid():
    spec = ex.SampleSpec(d=3, count=4, seed=0, sampler="plus-mix", mix_p=(0.0, 1.0))
    states = list(ex.sample_states(spec))
    assert purity(states[1][2]) == pytest.approx(1.0)


def test_spec_validation():
    with pytest.raises(UnsupportedDimensionError):
        ex.SampleSpec(d=9)
    with pytest.raises(InvalidModelError):
        ex.SampleSpec(d=3, n=4, deriv_mode="gmm-full")
    with pytest.raises(ValueError):
        ex.SampleSpec(d=3, sampler="nope")
    with pytest.raises(ValueError):
        ex.SampleSpec(d=3, mix_p=(2.0,))


@pytest.mark.parametrize("mode,n", [("gmm-full", 8), ("gmm-subset", 3), ("random-directions", 5)])
def test_model_streams(mode, n):
    spec = ex.SampleSpec(d=3, n=n, count=3, seed=5, deriv_mode=mode)
    models = list(ex.sample_models(spec))
    assert [s.index for s in models] == [0, 1, 2]
    assert all(s.model.n_params == n for s in models)
    again = list(ex.sample_models(spec))
    assert [s.model.content_hash() for s in models] == [s.model.content_hash() for s in again]


def test_run_samples_and_csv_roundtrip(tmp_path):
    spec = ex.SampleSpec(d=2, count=6, seed=3)
    res = ex.run_samples(spec)
    assert len(res.records) + len(res.quarantined) + len(res.failures) == 6
    for r in res.records:
        assert r.hcrb <= r.nhcrb + 1e-7
        assert r.ratio_nh == pytest.approx(r.nhcrb / r.hcrb)
    mpath = res.write(tmp_path / "out.csv")
    manifest = json.loads(mpath.read_text())
    assert manifest["content_hash"] == ex.git_blob_hash((tmp_path / "out.csv").read_bytes())
    assert manifest["counts"]["records"] == len(res.records)
    back = ex.records_from_csv(tmp_path / "out.csv")
    assert back == res.records


def test_git_blob_hash_matches_git():
    # `printf 'hello\n' | git hash-object --stdin`
    assert ex.git_blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_resume_reuses_records():
    spec = ex.SampleSpec(d=2, count=4, seed=9)
    first = ex.run_samples(spec)
    second = ex.run_samples(spec, resume=first.records[:2])
    assert second.records == first.records


@pytest.mark.slow
def test_parallel_output_is_identical():
    spec = ex.SampleSpec(d=2, count=8, seed=4)
    a = ex.run_samples(spec, jobs=1).csv_text()
    b = ex.run_samples(spec, jobs=3).csv_text()
    assert a == b


def test_purity_sweep_small():
    res = ex.purity_sweep(2, 6, seed=1, curve_points=3)
    assert res.records
    assert max(r.ratio_nh for r in res.records) <= 3 + 1e-5
    assert res.extra


def test_purity_sweep_dimension_limit():
    with pytest.raises(UnsupportedDimensionError):
        ex.purity_sweep(5, 1)


def test_subset_list_and_table_small():
    subs = ex.subset_list(3, 2)
    assert len(subs) == 28 and all(len(s) == 2 for s in subs)
    rows = ex.subset_table(3, [2])
    assert rows[0].hcrb == pytest.approx(2 / 3, abs=1e-8)
    assert rows[0].max_ratio == pytest.approx(2.0, abs=1e-6)


def test_grid_small():
    res = ex.ratio_grid([2], [1, 2, 3], samples_per_cell=2, seed=0)
    cells = {c.n: c for c in res.table}
    assert cells[3].max_ratio == pytest.approx(3.0, abs=1e-5)
    assert all(not c.empty for c in res.table)


def test_weighted_small():
    res = ex.weighted_experiment(2, 3, seed=2)
    assert len(res.extra["weighted"]) + len(res.failures) == 3


def test_gm_vs_nh_two_copy_half():
    res = ex.gm_vs_nh_experiment(d=2, samples=3, seed=0)
    assert res.extra["max_two_copy_ratio_error"] <= 1e-12
    with pytest.raises(UnsupportedDimensionError):
        ex.gm_vs_nh_experiment(d=4, samples=1, two_copy_nhcrb=True)
