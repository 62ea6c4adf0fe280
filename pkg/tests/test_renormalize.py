import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbilab._logscale import lnln_from_value
from cbilab.mechanisms import (log_immigration, stable_immigration, superlog_delta,
                               superlog_iterlog)
from cbilab.renormalize import (CoverageError, RenormMap, apply_to_ensemble, g_map, grid_index,
                                linear_map, linear_scale)
from cbilab.sampling import PathSample


def path(times, values, stream=0):
    return PathSample(np.asarray(times, float), lnln_from_value(np.asarray(values, float)),
                      meta={"stream": stream})


def test_g_map_sqrt_example():
    assert g_map(np.sqrt, 10.0, 4.0) == pytest.approx(0.2)


def test_g_map_zero():
    assert g_map(np.sqrt, 10.0, 0.0) == 0.0
    assert g_map(log_immigration(), 3.0, 0.0) == 0.0


@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
def test_g_map_log_preset_identity(c):
    y = np.logspace(-3, 200, 40)
    np.testing.assert_allclose(g_map(log_immigration(c), 7.0, y), np.log1p(y) / (c * 7.0),
                               rtol=1e-13)


def test_linear_map_examples():
    assert linear_map(stable_immigration(1.0, 0.5), 100.0, 2.0) == pytest.approx(2e-4, rel=1e-12)
    assert linear_map(stable_immigration(1.0, 0.5), 100.0, 0.0) == 0.0
    assert linear_scale(stable_immigration(1.0, 0.25), 16.0) == pytest.approx(16.0**-4, rel=1e-12)


def test_nonpositive_t():
    with pytest.raises(ValueError):
        g_map(np.sqrt, 0.0, 1.0)
    with pytest.raises(ValueError):
        RenormMap("log_case", -1.0)
    with pytest.raises(ValueError):
        RenormMap("bogus", 1.0)


def test_identity_map_returns_path_values():
    p = path([1.0, 2.0, 4.0], [0.5, 3.0, 7.0])
    rs = apply_to_ensemble(RenormMap("identity", 2.0), [p], s_grid=[0.5, 1.0, 2.0])
    np.testing.assert_allclose(rs.values[0], [0.5, 3.0, 7.0], rtol=1e-13)


def test_constant_path_under_g():
    F = np.sqrt
    p = path([1.0, 2.0, 3.0], [4.0, 4.0, 4.0])
    rs = apply_to_ensemble(RenormMap("nonlinear_g", 1.0, F=F), [p], s_grid=[1.0, 2.0, 3.0])
    np.testing.assert_allclose(rs.values[0], 1 / math.sqrt(0.25), rtol=1e-13)


def test_log_case_map_recovers_time():
    c, t = 2.0, 50.0
    s = np.array([0.25, 0.5, 1.0, 2.0])
    # Y_{st} = e^{c s t} - 1 reaches e^{200}; build codes directly
    codes = np.log(c * s * t)
    p = PathSample(s * t, codes, meta={"stream": 0})
    rs = apply_to_ensemble(RenormMap("log_case", t, c=c), [p], s_grid=s)
    np.testing.assert_allclose(rs.values[0], s, rtol=1e-14)


def test_grid_evaluation_takes_last_time_at_or_before():
    assert list(grid_index([1.0, 2.0, 3.0], [1.0, 2.5, 3.0])) == [0, 1, 2]
    with pytest.raises(CoverageError):
        grid_index([1.0, 2.0], [3.0])
    with pytest.raises(CoverageError):
        grid_index([1.0, 2.0], [0.5])


@pytest.mark.parametrize("mech", [log_immigration(1.5), superlog_iterlog(), superlog_delta(0.5)],
                         ids=lambda m: m.name)
def test_maps_monotone_and_codes_agree(mech):
    y = np.logspace(-5, 250, 300)
    for kind in ("nonlinear_g", "log_case"):
        m = RenormMap(kind, 20.0, mech, c=1.5)
        from_vals = m(y)
        assert np.all(np.diff(from_vals) >= 0)
        np.testing.assert_allclose(m.from_codes(lnln_from_value(y)), from_vals, rtol=1e-9)


def test_linear_map_from_codes():
    m = RenormMap("linear", 100.0, stable_immigration(1.0, 0.5))
    np.testing.assert_allclose(m.from_codes(lnln_from_value([2.0, 5e10])), [2e-4, 5e6], rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(1, 6), st.floats(-3, 3))
def test_equivalent_forms_merge(lt, ls):
    # F1 = the preset form, F2 = Phi itself is replaced by F1 * (1 + x): equivalent at 0
    mech = log_immigration(1.0)
    F1 = mech.equivalent
    F2 = lambda x: F1(x) * (1 + np.asarray(x))
    t = 10.0**lt
    # typical Y_t has log Y ~ t, so compare at y = e^{s t}
    y = math.exp(min(10.0**ls * t, 700))
    d_small = abs(g_map(F1, t, y) - g_map(F2, t, y))
    t2 = 10 * t
    y2 = math.exp(min(10.0**ls * t2, 700))
    d_big = abs(g_map(F1, t2, y2) - g_map(F2, t2, y2))
    assert d_big <= d_small + 1e-15


def test_ensemble_csv(tmp_path):
    paths = [path([1.0, 2.0], [1.0, 2.0], 0), path([1.0, 2.0], [3.0, 4.0], 1)]
    rs = apply_to_ensemble(RenormMap("identity", 1.0), paths, s_grid=[1.0, 2.0])
    np.testing.assert_allclose(rs.joint(1.0, 2.0), [[1, 2], [3, 4]])
    rs.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "s,stream,value" and len(lines) == 5
