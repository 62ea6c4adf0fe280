import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbilab.limitlab import (ConvergenceTable, KsReport, TestFunction, esn_crossvalidate,
                             esn_marginal_cdf, fastjump_check, fdd_extremal_cdf,
                             generator_convergence_table, generator_limit, generator_prelimit,
                             generator_terms, ks_one_sample, ks_two_sample,
                             mc_generator_subordinator, verify_prop1_transforms,
                             verify_subordinator_limit)
from cbilab.limitlab.generator import drift_growth
from cbilab.limitlab.ks import kolmogorov_quantile
from cbilab.mechanisms import (ImmigrationMechanism, exp_immigration, linear, log_immigration,
                               rational_branching, sublog, superlog_iterlog, zero_branching)


# --- laws ------------------------------------------------------------------------

def test_fdd_examples():
    assert fdd_extremal_cdf([1.0], [1.0]) == pytest.approx(math.exp(-1))
    assert fdd_extremal_cdf([0.5, 2.0], [3.0, 3.0]) == pytest.approx(math.exp(-2 / 3))
    assert fdd_extremal_cdf([1.0, 2.0], [2.0, 1.0]) == pytest.approx(math.exp(-2))


def test_fdd_domain():
    with pytest.raises(ValueError):
        fdd_extremal_cdf([2.0, 1.0], [1.0, 1.0])


@settings(max_examples=50)
@given(st.lists(st.floats(0.05, 5), min_size=2, max_size=4, unique=True),
       st.lists(st.floats(0.05, 10), min_size=4, max_size=4), st.integers(0, 3),
       st.floats(1.0, 3.0))
def test_fdd_monotone_in_each_coordinate(ss, ys, k, bump):
    s = sorted(ss)
    y = ys[:len(s)]
    k = k % len(s)
    up = list(y)
    up[k] *= bump
    assert fdd_extremal_cdf(s, up) >= fdd_extremal_cdf(s, y) - 1e-15


@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 4), st.floats(0.0, 4))
def test_fdd_multiplicative_for_increasing_levels(s1, ds, y1, dy):
    # with y1 <= y2 the two increments factor
    s2, y2 = s1 + ds, y1 + dy
    assert fdd_extremal_cdf([s1, s2], [y1, y2]) == pytest.approx(
        math.exp(-s1 / y1) * math.exp(-ds / y2))


def test_esn_marginal_examples():
    assert esn_marginal_cdf(0.0, 1.0, 1.0) == pytest.approx(math.exp(-1))
    assert esn_marginal_cdf(1.0, 1.0, 1.0, c=2.0) == pytest.approx(0.25)
    assert esn_marginal_cdf(0.7, 1.0, 1e300) == pytest.approx(1.0)
    assert esn_marginal_cdf(-0.5, 2.0, 0.9) == 0.0


@given(st.floats(0.1, 5), st.floats(0.1, 20), st.floats(0.2, 3))
def test_esn_zero_slope_matches_extremal(s, y, c):
    assert esn_marginal_cdf(0.0, s, y, c) == pytest.approx(fdd_extremal_cdf([c * s], [y]))


@given(st.floats(-1, 1), st.floats(0.1, 3), st.floats(0.1, 10))
def test_esn_marginal_against_quadrature(gamma, s, y):
    y = y + max(-gamma * s, 0) + 0.05
    expo = mpmath.quad(lambda v: 1 / (y + gamma * v), [0, s])
    assert esn_marginal_cdf(gamma, s, y) == pytest.approx(float(mpmath.exp(-expo)), rel=1e-10)


# --- KS ----------------------------------------------------------------------------

def test_ks_constant_sample():
    G = lambda y: np.exp(-1 / np.asarray(y))
    rep = ks_one_sample(np.full(50, 2.0), G)
    assert rep.statistic == pytest.approx(max(math.exp(-0.5), 1 - math.exp(-0.5)))


def test_ks_identical_two_samples():
    a = np.random.default_rng(0).random(300)
    assert ks_two_sample(a, a.copy()).statistic == 0.0


def test_ks_critical_values():
    assert kolmogorov_quantile(0.05) == pytest.approx(1.3581, abs=1e-4)
    rep = ks_one_sample(np.linspace(0.01, 0.99, 400), lambda x: x, level=0.05)
    assert rep.critical == pytest.approx(1.3581 / 20, abs=1e-5)
    rep2 = ks_two_sample(np.arange(100.0), np.arange(300.0), level=0.01)
    assert rep2.critical == pytest.approx(kolmogorov_quantile(0.01) * math.sqrt(400 / 30000))


def test_ks_empty_input():
    with pytest.raises(ValueError):
        ks_one_sample([], lambda x: x)
    with pytest.raises(ValueError):
        ks_two_sample([1.0], [])


def test_ks_matches_scipy():
    from scipy import stats
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=500), rng.normal(0.1, size=700)
    assert ks_two_sample(a, b).statistic == pytest.approx(stats.ks_2samp(a, b).statistic)
    assert ks_one_sample(a, stats.norm.cdf).statistic == pytest.approx(
        stats.kstest(a, stats.norm.cdf).statistic)


def test_ks_null_calibration():
    # rejection rate of e^{-1/y} draws at the 5% level over R = 200 runs
    R, n, level = 200, 10000, 0.05
    rng = np.random.default_rng(12345)
    G = lambda y: np.exp(-1 / y)
    rejects = sum(ks_one_sample(-1 / np.log(rng.random(n)), G, level).verdict == "reject"
                  for _ in range(R))
    assert abs(rejects / R - level) <= 2 * math.sqrt(level * (1 - level) / R)


# --- tables ------------------------------------------------------------------------

def test_table_trend_and_serialisation(tmp_path):
    tab = ConvergenceTable("x", {"a": np.float64(1.0)},
                           [{"t": 10.0, "discrepancy": 0.3}, {"t": 1.0, "discrepancy": 0.5},
                            {"t": 100.0, "discrepancy": 0.35}])
    assert [r["t"] for r in tab.rows] == [1.0, 10.0, 100.0]
    assert tab.monotone_trend and not tab.strictly_decreasing
    tab.checks["ok"] = np.bool_(True)
    tab.to_json(tmp_path / "r.json")
    tab.to_csv(tmp_path / "t.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["verdict"] == "pass" and data["experiment"] == "x"
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,discrepancy"


# --- Prop 1 transforms -----------------------------------------------------------------

def test_prop1_rational_decreasing():
    tab = verify_prop1_transforms(1.0, 1.0, 1.0, 1.0, 1.0)
    d = tab.discrepancies
    assert d[-1] < 0.01 and np.all(np.diff(d) < 0)
    assert tab.verdict == "pass"


def test_prop1_beta_below_alpha_uses_subordinator_limit():
    tab = verify_prop1_transforms(1.0, 0.5, 1.0, 1.0, 1.0, t_list=(1e2, 1e4, 1e6))
    assert tab.verdict == "pass"


def test_prop1_zero_lambda():
    tab = verify_prop1_transforms(1.0, 1.0, 1.0, 1.0, 1.0, lambda_grid=[0.0])
    assert np.all(tab.discrepancies == 0.0)


# --- generator ----------------------------------------------------------------------

def test_bump_function_shape():
    f = TestFunction()
    x = np.linspace(0, 4, 401)
    assert np.all(f(x[x <= 0.5]) == 0) and np.all(f(x[(x >= 1) & (x <= 2)]) == 1)
    assert np.all(f(x[x >= 3]) == 0)
    h = 1e-6
    for z in (0.7, 1.3, 2.4, 2.9):
        assert f.d1(z) == pytest.approx((f(z + h) - f(z - h)) / (2 * h), rel=1e-6)
        assert f.d2(z) == pytest.approx((f.d1(z + h) - f.d1(z - h)) / (2 * h), rel=1e-5, abs=1e-6)


def test_constant_function_gives_zero():
    f0 = TestFunction(scale=0.0)
    for x in (0.0, 0.7, 1.5):
        assert generator_prelimit(linear(1.0), log_immigration(1.0), f0, 100.0, x) == 0.0
        assert generator_limit(1.0, 1.0, f0, x) == 0.0
    tab = generator_convergence_table(linear(1.0), log_immigration(1.0), f0, t_list=(10, 100))
    assert np.all(tab.discrepancies == 0.0)


def test_limit_beyond_support():
    assert generator_limit(1.0, 2.0, TestFunction(), 3.5) == 0.0


def test_limit_ramp_is_log_two():
    f = TestFunction(1.0, 2.0, 1e3, 1e3 + 1)
    val = generator_limit(0.0, 1.0, f, 0.5)
    oracle = mpmath.quad(lambda z: float(f.d1(float(z))) / z, [1, 2])
    assert val == pytest.approx(float(oracle) - 1e-3, abs=2e-6)
    assert val == pytest.approx(math.log(2), abs=0.02)


def test_generator_limit_needs_positive_c():
    with pytest.raises(ValueError):
        generator_limit(1.0, 0.0, TestFunction(), 1.0)


def test_generator_log_case_close_to_limit():
    f = TestFunction()
    pre = generator_prelimit(linear(1.0), log_immigration(1.0), f, 1e3, 1.0)
    assert pre == pytest.approx(generator_limit(1.0, 1.0, f, 1.0), abs=0.05)


def test_generator_table_decreasing_for_log():
    tab = generator_convergence_table(linear(1.0), log_immigration(1.0), TestFunction(),
                                      t_list=(10, 100, 1000))
    assert tab.strictly_decreasing and tab.verdict == "pass"


def test_generator_sublog_drift_blows_up():
    # f'(1) must be nonzero for the drift term to show
    f = TestFunction(0.5, 1.5, 2.0, 3.0)
    tab = generator_convergence_table(linear(1.0), sublog(), f, x_grid=[1.0],
                                      t_list=(10, 100, 1000))
    assert drift_growth(tab) >= 10
    assert tab.checks["drift_blows_up"]


def test_zero_branching_reduces_to_subordinator_generator():
    f = TestFunction()
    phi = log_immigration(1.0)
    terms = generator_terms(zero_branching(), phi, f, 50.0, 1.2)
    assert terms["I1"] == 0.0 and terms["I3"] == 0.0 and terms["I4"] == 0.0


@pytest.mark.parametrize("x", [0.8, 1.6, 2.5])
def test_generator_against_monte_carlo(x):
    phi, f, t = log_immigration(1.0), TestFunction(), 20.0
    exact = generator_prelimit(zero_branching(), phi, f, t, x)
    est, se = mc_generator_subordinator(phi, f, t, x, h=1e-4, n=200000, seed=int(10 * x))
    assert abs(est - exact) <= 4 * se + 2e-3 * abs(exact) + 1e-3


def test_branching_jumps_generator_term():
    # on the rise of f the branching jumps contribute; on the plateau they cannot
    psi, phi, f = rational_branching(1.0), log_immigration(1.0), TestFunction()
    rise = generator_terms(psi, phi, f, 100.0, 0.8)["I4"]
    flat = generator_terms(psi, phi, f, 100.0, 1.5)["I4"]
    assert np.isfinite(rise) and abs(flat) <= abs(rise)


# --- fast jumps ----------------------------------------------------------------------

def test_fastjump_log_preset():
    tab = fastjump_check(log_immigration(1.0), 1.0, 2.0)
    assert tab.rows[-1]["value"] == pytest.approx(0.5, rel=0.1)


def test_fastjump_from_zero_is_exact():
    # with x = 0, t nu_tail(g^-1(v)) = 1/v identically for the profile presets
    for phi in (log_immigration(2.0), superlog_iterlog()):
        tab = fastjump_check(phi, 0.0, 1.5, t_list=(1.0, 1e1, 1e2))
        assert np.all(tab.discrepancies < 1e-10)


def test_fastjump_overflow_is_reported():
    with pytest.raises(OverflowError):
        fastjump_check(superlog_iterlog(), 0.0, 1.5, t_list=(1e3,))


def test_fastjump_large_v_vanishes():
    tab = fastjump_check(log_immigration(1.0), 0.5, 1e4, t_list=(1e3,))
    assert tab.rows[0]["value"] < 1e-3


def test_fastjump_domain():
    with pytest.raises(ValueError):
        fastjump_check(log_immigration(), 2.0, 1.0)


# --- pipelines (small) -------------------------------------------------------------------

def test_subordinator_pipeline_not_applicable_without_slow_variation():
    phi = ImmigrationMechanism(beta=1.0, name="drift")
    tab = verify_subordinator_limit(phi, n=100)
    assert tab.checks == {"applicable": False} and tab.verdict == "fail"


def test_subordinator_pipeline_small():
    tab = verify_subordinator_limit(log_immigration(1.0), t_list=(50, 100), n=2000, seed=3)
    assert len(tab.rows) == 2
    assert tab.rows[-1]["discrepancy"] < 0.06
    assert len(tab.params["joint_cells"]) == 9


def test_esn_crossvalidate_small():
    rep = esn_crossvalidate(0.5, n=3000, seed=8)
    assert isinstance(rep, KsReport) and rep.kind == "two-sample" and rep.accepted
