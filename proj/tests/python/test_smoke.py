"""End-to-end smoke tests for the python bindings."""

import numpy as np
import pytest

import moss


@pytest.fixture(scope="module")
def fitted():
    ds = moss.simulate(300, seed=11)
    fit = moss.fit_nuisance(ds)
    pred = moss.predict_matrices(fit, ds, 1)
    return ds, pred


def test_simulated_dataset_shape():
    ds = moss.simulate(200, seed=3)
    assert ds.n == 200
    assert ds.t_max <= 21
    assert ds.covariate_names == ["W"]


def test_one_step_is_monotone_and_in_range(fitted):
    ds, pred = fitted
    est = moss.tmle_one_step(pred, ds)
    psi = np.asarray(est.psi)
    assert est.monotone()
    assert np.all(psi >= 0.0) and np.all(psi <= 1.0)
    assert np.all(np.diff(psi) <= 1e-12)


def test_trace_loglik_is_non_decreasing(fitted):
    ds, pred = fitted
    est = moss.tmle_one_step(pred, ds)
    ll = np.asarray(est.trace.loglik_path)
    assert ll.size > 0
    assert np.all(np.diff(ll) >= -1e-9)


def test_band_contains_pointwise(fitted):
    ds, pred = fitted
    est = moss.tmle_one_step(pred, ds)
    band = moss.simultaneous_band(est.eif, est.psi, alpha=0.05, mc_draws=4000, seed=5)
    assert band.simultaneous_quantile >= band.pointwise_quantile - 0.03
    lo_pw = np.asarray(band.lo_pointwise)
    lo_sim = np.asarray(band.lo_simultaneous)
    se = np.asarray(band.se)
    assert np.all(lo_sim <= lo_pw + 3e-2 * se + 1e-12)


def test_estimator_family_contracts(fitted):
    ds, pred = fitted
    km = moss.kaplan_meier(ds, 1)
    assert km.monotone()
    plug = moss.plugin_curve(pred)
    assert plug.monotone()
    ee = moss.ee(pred, ds)
    assert ee.eif is not None
    ipcw = moss.ipcw(pred, ds)
    assert np.asarray(ipcw.psi).shape == np.asarray(plug.psi).shape


def test_determinism():
    a = moss.simulate(150, seed=21)
    b = moss.simulate(150, seed=21)
    ta = [o.time for o in a.observations]
    tb = [o.time for o in b.observations]
    assert ta == tb


def test_oracle_matches_closed_form():
    psi = np.asarray(moss.oracle_curve(1, 21, draws=200000))
    t = 10
    closed = (3.0 - np.log(t)) / 1.5
    assert abs(psi[t - 1] - closed) < 0.005


def test_dataset_roundtrip_and_errors():
    ds = moss.SurvivalDataset(
        time=[2, 5, 3],
        event=[1, 0, 1],
        treatment=[0, 1, 1],
        covariates=[[0.5], [1.25], [-0.75]],
        covariate_names=["w1"],
    )
    assert ds.n == 3
    assert ds.t_max == 5
    with pytest.raises(moss.DataError):
        moss.SurvivalDataset(
            time=[1], event=[2], treatment=[0], covariates=[[0.0]], covariate_names=["w1"]
        )
