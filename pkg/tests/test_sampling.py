import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cbilab.cumulant import laplace_cbi, solve_v
from cbilab.mechanisms import (ImmigrationMechanism, exp_immigration, exp_tail_branching, feller,
                               linear, log_immigration, phi_eval, stable_branching,
                               stable_immigration, superlog_iterlog, zero_branching)
from cbilab.rng import RngStreamSpec, worker_count
from cbilab.sampling import (CapabilityError, PathSample, ReciprocalTail, TruncationError,
                             cb_step, esn_from_atoms, sample_cb, sample_cbi_shotnoise,
                             sample_ensemble, sample_esn_atoms, sample_esn_grid,
                             sample_subordinator, write_atoms_csv, write_paths_csv)
from cbilab.limitlab.laws import esn_marginal_cdf
from cbilab.limitlab.ks import ks_one_sample, ks_two_sample


def mc_laplace(vals, lam):
    e = np.exp(-lam * vals)
    return e.mean(), e.std(ddof=1) / math.sqrt(e.size)


# --- subordinators ---------------------------------------------------------------

def test_pure_drift_subordinator_is_exact():
    phi = ImmigrationMechanism(beta=1.0, name="drift")
    p = sample_subordinator(phi, 3.0, grid=[0.5, 1.0, 3.0], rng=RngStreamSpec(4))
    np.testing.assert_allclose(p.values, [0.5, 1.0, 3.0], rtol=1e-14)


def test_exponential_jump_count_is_poisson():
    phi = exp_immigration(1.0, 1.0)
    paths = sample_ensemble(sample_subordinator, 4000, 11, phi=phi, T=10.0)
    counts = np.array([p.atom_times.size for p in paths])
    assert abs(counts.mean() - 10.0) <= 4 * math.sqrt(10.0 / counts.size)


def test_log_subordinator_transform():
    phi = log_immigration(1.0)
    paths = sample_ensemble(sample_subordinator, 20000, 5, phi=phi, T=1.0, keep_atoms=False)
    est, se = mc_laplace(np.array([p.values[-1] for p in paths]), 1.0)
    exact = laplace_cbi(zero_branching(), phi, 0.0, 1.0, 1.0)
    assert abs(est - exact) <= 4 * se


def test_stable_subordinator_transform_with_truncation():
    phi = stable_immigration(1.0, 0.5)
    paths = sample_ensemble(sample_subordinator, 4000, 2, phi=phi, T=1.0, eps=1e-6,
                            keep_atoms=False)
    est, se = mc_laplace(np.array([p.values[-1] for p in paths]), 1.0)
    assert abs(est - math.exp(-1.0)) <= 4 * se + 2e-3


def test_infinite_truncated_mass_is_rejected():
    with pytest.raises(TruncationError):
        sample_subordinator(stable_immigration(1.0, 0.5), 1.0, eps=0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 1000))
def test_subordinator_paths_nondecreasing(seed, stream):
    p = sample_subordinator(superlog_iterlog(), 50.0, grid=np.linspace(1, 50, 25),
                            rng=RngStreamSpec(seed, stream))
    assert np.all(np.diff(p.codes) >= 0)
    assert np.all(p.values >= 0)


def test_grid_validation():
    with pytest.raises(ValueError):
        sample_subordinator(exp_immigration(), 1.0, grid=[0.5, 0.4])
    with pytest.raises(ValueError):
        sample_subordinator(exp_immigration(), 1.0, grid=[2.0])


# --- CB -----------------------------------------------------------------------

def test_linear_cb_deterministic():
    p = sample_cb(linear(1.0), 1.0, math.log(2), rng=RngStreamSpec(0))
    assert p.values[-1] == pytest.approx(0.5, rel=1e-14)


def test_feller_mean_and_transform():
    psi = feller(1.0, 2.0)
    paths = sample_ensemble(sample_cb, 20000, 9, psi=psi, x0=1.0, T=1.0)
    x = np.array([p.values[-1] for p in paths])
    assert abs(x.mean() - math.exp(-1)) <= 4 * x.std(ddof=1) / math.sqrt(x.size)
    est, se = mc_laplace(x, 1.0)
    assert abs(est - math.exp(-solve_v(psi, 1.0, 1.0))) <= 4 * se


def test_feller_zero_drift_transition():
    psi = feller(0.0, 1.0)
    paths = sample_ensemble(sample_cb, 10000, 3, psi=psi, x0=2.0, T=1.5)
    est, se = mc_laplace(np.array([p.values[-1] for p in paths]), 0.8)
    assert abs(est - math.exp(-2.0 * solve_v(psi, 0.8, 1.5))) <= 4 * se


def test_feller_absorption():
    gen = RngStreamSpec(1).generator()
    z = cb_step(feller(1.0, 2.0), np.full(2000, -np.inf), 1.0, gen)
    assert np.all(z == -np.inf)
    paths = sample_ensemble(sample_cb, 200, 4, psi=feller(2.0, 4.0), x0=0.1, T=5.0,
                            grid=np.linspace(0.5, 5, 10))
    for p in paths:
        dead = np.flatnonzero(p.values == 0)
        if dead.size:
            assert np.all(p.values[dead[0]:] == 0)


def test_feller_huge_state_keeps_relative_scale():
    # above the exact Poisson range the transition is a narrow relative jitter
    gen = RngStreamSpec(2).generator()
    z = np.full(1000, 50.0)                 # log(log1p(y)) = 50: y = exp(e^50)
    out = cb_step(feller(1.0, 2.0), z, 1.0, gen)
    assert np.allclose(out, z, rtol=1e-12)


def test_unsupported_cb_family():
    with pytest.raises(CapabilityError):
        sample_cb(stable_branching(1.0, 0.5), 1.0, 1.0)


# --- shot-noise CBI -------------------------------------------------------------

def test_shotnoise_without_immigration_is_zero():
    p = sample_cbi_shotnoise(feller(), ImmigrationMechanism(name="none"), 2.0, grid=[1.0, 2.0])
    assert np.all(p.values == 0)


def test_shotnoise_zero_branching_matches_subordinator():
    phi = log_immigration(1.0)
    a = sample_ensemble(sample_cbi_shotnoise, 20000, 21, psi=zero_branching(), phi=phi, T=1.0,
                        keep_atoms=False)
    b = sample_ensemble(sample_subordinator, 20000, 22, phi=phi, T=1.0, keep_atoms=False)
    rep = ks_two_sample(np.array([p.values[-1] for p in a]),
                        np.array([p.values[-1] for p in b]), level=0.01)
    assert rep.verdict == "accept"


@pytest.mark.parametrize("psi", [feller(1.0, 2.0), linear(0.5)], ids=lambda p: p.name)
def test_shotnoise_transform(psi):
    phi = exp_immigration(1.0, 1.0)
    paths = sample_ensemble(sample_cbi_shotnoise, 20000, 31, psi=psi, phi=phi, T=1.0)
    est, se = mc_laplace(np.array([p.values[-1] for p in paths]), 1.0)
    assert abs(est - laplace_cbi(psi, phi, 0.0, 1.0, 1.0)) <= 4 * se


def test_shotnoise_capabilities():
    with pytest.raises(CapabilityError):
        sample_cbi_shotnoise(feller(), ImmigrationMechanism(beta=1.0), 1.0)
    with pytest.raises(CapabilityError):
        sample_cbi_shotnoise(exp_tail_branching(), exp_immigration(), 1.0)


# --- ESN -----------------------------------------------------------------------

@pytest.mark.parametrize("gamma", [0.0, 1.0])
def test_esn_grid_marginal(gamma):
    paths = sample_ensemble(sample_esn_grid, 20000, 40, gamma=gamma, mu_tail=ReciprocalTail(),
                            times=[1.0])
    rep = ks_one_sample(np.array([p.values[0] for p in paths]),
                        lambda y: esn_marginal_cdf(gamma, 1.0, y), level=0.01)
    assert rep.verdict == "accept"


def test_esn_negative_slope_paths_nondecreasing():
    for p in sample_ensemble(sample_esn_grid, 200, 1, gamma=-0.5, times=np.linspace(0.1, 5, 30)):
        assert np.all(np.diff(p.values) >= 0)


def test_esn_forced_atom():
    assert esn_from_atoms(1.0, [0.5], [2.0], [1.0])[0] == 1.5
    assert esn_from_atoms(1.0, [0.5], [2.0], [0.25])[0] == -np.inf


def test_esn_atoms_censoring_flag():
    # a tiny tail leaves no atom above eps
    p = sample_esn_atoms(1.0, ReciprocalTail(1e-9), T=1.0, eps=1.0, rng=RngStreamSpec(0))
    assert p.meta["censored"].all()
    assert p.values[-1] == 0.0


def test_esn_atoms_vs_grid():
    mu = ReciprocalTail()
    a = sample_ensemble(sample_esn_grid, 20000, 50, gamma=0.0, mu_tail=mu, times=[1.0])
    b = sample_ensemble(sample_esn_atoms, 20000, 51, gamma=0.0, mu_tail=mu, T=1.0, eps=1e-3)
    rep = ks_two_sample(np.array([p.values[-1] for p in a]), np.array([p.values[-1] for p in b]))
    assert rep.verdict == "accept"


def test_reciprocal_sup_quantile_closed_form():
    mu = ReciprocalTail(2.0)
    for gamma in (-0.5, 0.0, 0.7):
        for u in (0.1, 0.5, 0.9):
            y = mu.sup_quantile(u, 0.3, gamma)
            assert math.exp(-mu.void_exponent(y, 0.3, gamma)) == pytest.approx(u, rel=1e-10)


# --- determinism and export ------------------------------------------------------

def test_streams_reproducible_and_distinct():
    a = sample_subordinator(log_immigration(), 5.0, rng=RngStreamSpec(7, 3))
    b = sample_subordinator(log_immigration(), 5.0, rng=RngStreamSpec(7, 3))
    c = sample_subordinator(log_immigration(), 5.0, rng=RngStreamSpec(7, 4))
    assert np.array_equal(a.codes, b.codes)
    assert not np.array_equal(a.codes, c.codes)


def test_ensemble_independent_of_worker_count():
    kw = dict(psi=feller(), phi=exp_immigration(), T=2.0, grid=[1.0, 2.0])
    one = sample_ensemble(sample_cbi_shotnoise, 60, 99, workers=1, **kw)
    three = sample_ensemble(sample_cbi_shotnoise, 60, 99, workers=3, **kw)
    assert [p.meta["stream"] for p in three] == list(range(60))
    for p, q in zip(one, three):
        assert np.array_equal(p.codes, q.codes)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CBILAB_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count() == 2
    monkeypatch.delenv("CBILAB_THREADS")
    assert worker_count() == 1


def test_csv_export(tmp_path):
    paths = sample_ensemble(sample_subordinator, 3, 1, phi=exp_immigration(), T=2.0,
                            grid=[1.0, 2.0])
    write_paths_csv(paths, tmp_path / "p.csv")
    write_atoms_csv(paths, tmp_path / "a.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "stream,time,value" and len(lines) == 7
    assert (tmp_path / "a.csv").read_text().startswith("stream,time,mark")


def test_huge_values_survive_as_codes():
    # iterlog jumps exceed float range quickly; codes stay finite
    p = sample_subordinator(superlog_iterlog(), 1e4, rng=RngStreamSpec(3))
    assert np.isfinite(p.codes[-1])
    assert isinstance(p, PathSample)
