"""Generator numerics for the renormalised CBI x -> g_t(Y_{st}).

With g_t(y) = 1 / (t H(y)), H(y) = F(1/y), the prelimit generator
applied to f at x = g_t(y) splits into

    I1 = t (beta - b y) (f o g)'(y)                       drift
    I2 = t int_x^inf f'(z) nu_tail(g^-1(z) - g^-1(x)) dz   immigration jumps
    I3 = t sigma2/2 y (f o g)''(y)                         diffusion
    I4 = t y int (f o g(y+u) - f o g(y) - u (f o g)'(y)) pi(du)

and the limit generator is int_x^inf f'(z)/z dz - (b/c) f'(x).
Everything is expressed through log y and the closed forms of yH'(y) and
y^2 H''(y), because y = g^-1(x) is astronomically large.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..mechanisms import ZeroMeasure
from ..rng import RngStreamSpec
from .tables import ConvergenceTable


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _smoothstep_d1(u):
    inside = (u > 0) & (u < 1)
    return np.where(inside, 30.0 * u**2 * (1.0 - u) ** 2, 0.0)


def _smoothstep_d2(u):
    inside = (u > 0) & (u < 1)
    return np.where(inside, 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u), 0.0)


@dataclass(frozen=True)
class TestFunction:
    """C^2 bump: 0 on [0, a1], quintic rise to 1 on [a2, a3], back to 0 at a4."""

    __test__ = False  # not a pytest class

    a1: float = 0.5
    a2: float = 1.0
    a3: float = 2.0
    a4: float = 3.0
    scale: float = 1.0

    def __post_init__(self):
        if not (0 <= self.a1 < self.a2 <= self.a3 < self.a4):
            raise ValueError("need 0 <= a1 < a2 <= a3 < a4")

    @property
    def breakpoints(self):
        return (self.a1, self.a2, self.a3, self.a4)

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        up = (x - self.a1) / (self.a2 - self.a1)
        down = (self.a4 - x) / (self.a4 - self.a3)
        rising = x < self.a2
        return x, up, down, rising

    def __call__(self, x):
        x, up, down, rising = self._parts(x)
        return self.scale * np.where(rising, _smoothstep(up), _smoothstep(down))

    def d1(self, x):
        x, up, down, rising = self._parts(x)
        return self.scale * np.where(rising, _smoothstep_d1(up) / (self.a2 - self.a1),
                                     -_smoothstep_d1(down) / (self.a4 - self.a3))

    def d2(self, x):
        x, up, down, rising = self._parts(x)
        return self.scale * np.where(rising, _smoothstep_d2(up) / (self.a2 - self.a1) ** 2,
                                     _smoothstep_d2(down) / (self.a4 - self.a3) ** 2)


def _quad(h, a, b, points=()):
    pts = sorted(p for p in points if a < p < b)
    edges = [a] + pts + [b]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += integrate.quad(h, lo, hi, epsabs=1e-13, epsrel=1e-10, limit=400)[0]
    return total


def _logy_of_x(form, t, x):
    """log g_t^{-1}(x): H(y) = 1/(t x)."""
    return float(form.logy_of_H(1.0 / (t * x)))


def _log_diff(lz, lx):
    """log(e^lz - e^lx) for lz > lx."""
    if lx == -np.inf:
        return lz
    return lz + math.log(-math.expm1(lx - lz))


def _g_derivs(form, ly, t):
    """t y g'(y), t y g''(y) * y, and t y g'(y)^2 * y at y = e^ly, all divided as noted.

    Returns K1 = t y g'(y) and the pieces needed for I3 and I4.
    """
    H = float(form.H_logy(ly))
    yH1 = float(form.yH1_logy(ly))
    y2H2 = float(form.y2H2_logy(ly))
    K1 = -yH1 / (H * H)                       # t y g'(y)
    K2 = (2.0 * yH1 * yH1 - H * y2H2) / H**3  # t y^2 g''(y)
    Ksq = yH1 * yH1 / H**4                    # t^2 y^2 g'(y)^2
    return K1, K2, Ksq


def generator_terms(psi, phi, f: TestFunction, t, x, cutoff_rel=1e-3):
    """Dictionary with I1..I4 and their sum for the prelimit generator at x."""
    form = phi.equivalent
    if form is None:
        raise ValueError("immigration preset needs a closed-form equivalent")
    fx1, fx2 = float(f.d1(x)), float(f.d2(x))
    nu = phi.jump_measure
    lx = _logy_of_x(form, t, x) if x > 0 else -np.inf

    # I2: t int_x^inf f'(z) nu_tail(g^-1(z) - g^-1(x)) dz
    def i2_integrand(z):
        d = f.d1(z)
        if d == 0.0:
            return 0.0
        la = _log_diff(_logy_of_x(form, t, z), lx)
        return float(d) * float(nu.tail_log(la))

    lo, hi = max(x, f.a1), f.a4
    I2 = t * _quad(i2_integrand, lo, hi, f.breakpoints) if hi > lo and not isinstance(nu, ZeroMeasure) else 0.0
    if x == 0:
        return {"I1": 0.0, "I2": I2, "I3": 0.0, "I4": 0.0, "total": I2}

    K1, K2, Ksq = _g_derivs(form, lx, t)
    inv_y = math.exp(-lx)
    # I1 = t (beta - b y) g'(y) f'(x) = K1 (beta / y - b) f'(x)
    I1 = K1 * (phi.beta * inv_y - psi.b) * fx1
    # I3 = t sigma2/2 y (f''(x) g'^2 + f'(x) g'') = sigma2/2 (f'' Ksq / (t y) + f' K2 / y)
    I3 = 0.5 * psi.sigma2 * (fx2 * Ksq / t + fx1 * K2) * inv_y
    I4 = _branching_jumps(psi, form, f, t, x, lx, K1, K2, Ksq, cutoff_rel) if psi.has_jumps else 0.0
    return {"I1": I1, "I2": I2, "I3": I3, "I4": I4, "total": I1 + I2 + I3 + I4}


def _branching_jumps(psi, form, f, t, x, lx, K1, K2, Ksq, cutoff_rel):
    """I4, split at the cutoff C = cutoff_rel * y.

    Jumps below C enter through the Taylor term u^2/2 (f o g)''(y); jumps
    above C are integrated exactly in the relative size w = u / y.
    """
    pi = psi.jump_measure
    # t y^2 (f o g)''(y) = f''(x) Ksq / t + f'(x) K2
    h2 = float(f.d2(x)) * Ksq / t + float(f.d1(x)) * K2
    lC = math.log(cutoff_rel) + lx
    small = 0.5 * h2 * math.exp(pi.log_second_moment(lC) - lx) if h2 != 0 else 0.0
    fx, fx1 = float(f(x)), float(f.d1(x))

    def big_integrand(w):
        lz = lx + math.log1p(w)
        gz = 1.0 / (t * float(form.H_logy(lz)))
        delta = float(f(gz)) - fx - w * K1 * fx1 / t
        # t y * density(y w) * y dw
        return delta * t * math.exp(min(float(pi.log_density(lx + math.log(w))) + 2.0 * lx, 700.0))

    big = _quad(big_integrand, cutoff_rel, 1e6, (1.0, 10.0, 100.0))
    return small + big


def generator_prelimit(psi, phi, f: TestFunction, t, x):
    """A^(t) f(x) = I1 + I2 + I3 + I4."""
    return generator_terms(psi, phi, f, t, x)["total"]


def generator_limit(b, c, f: TestFunction, x, mu_tail=None):
    """int_x^inf f'(z)/z dz - (b/c) f'(x) for the ESN with intensity tail 1/x."""
    lo, hi = max(x, f.a1), f.a4
    jump = _quad(lambda z: float(f.d1(z)) / z, lo, hi, f.breakpoints) if hi > lo else 0.0
    if c <= 0:
        raise ValueError("the limit needs a positive Log constant c")
    drift = -(b / c) * float(f.d1(x))
    return jump + drift


def generator_convergence_table(psi, phi, f=None, x_grid=None, t_list=(10.0, 100.0, 1000.0)):
    """max over x_grid of |A^(t) f - A f| per t.

    The limit uses b from psi and c from the preset's declared Log limit.
    """
    f = TestFunction() if f is None else f
    x_grid = np.linspace(0.0, 4.0, 20) if x_grid is None else np.asarray(x_grid, dtype=float)
    c = phi.log_limit
    rows = []
    for t in t_list:
        diffs, drift = [], []
        for x in x_grid:
            terms = generator_terms(psi, phi, f, t, x)
            lim = generator_limit(psi.b, c, f, x) if np.isfinite(c) and c > 0 else np.nan
            diffs.append(abs(terms["total"] - lim))
            drift.append(abs(terms["I1"]))
        rows.append({"t": float(t), "discrepancy": float(np.max(diffs)),
                     "max_abs_I1": float(np.max(drift))})
    table = ConvergenceTable("generator-table",
                             {"psi": psi.name, "phi": phi.name, "b": psi.b, "c": c,
                              "f": list(f.breakpoints), "n_x": int(x_grid.size)}, rows)
    if np.isfinite(c) and c > 0:
        table.checks["decreasing"] = table.strictly_decreasing
    else:
        table.checks["drift_blows_up"] = drift_growth(table) >= 10.0
    return table


def drift_growth(table):
    d = [r["max_abs_I1"] for r in table.rows]
    return d[-1] / d[0] if d[0] > 0 else np.inf


def fastjump_check(phi, x, v, t_list=(1e2, 1e3, 1e4)):
    """t nu_tail(g^-1(v) - g^-1(x)) against its limit 1/v, per t."""
    if not v > x:
        raise ValueError("need v > x so that g^-1(v) > g^-1(x)")
    form = phi.equivalent
    rows = []
    for t in t_list:
        lx = _logy_of_x(form, t, x) if x > 0 else -np.inf
        lv = _logy_of_x(form, t, v)
        if not np.isfinite(lv):
            raise OverflowError(f"log g^-1({v}) is out of float range at t={t:g}")
        if lv <= lx:
            raise ValueError("g^-1(v) <= g^-1(x)")
        val = t * float(phi.jump_measure.tail_log(_log_diff(lv, lx)))
        rows.append({"t": float(t), "x": float(x), "v": float(v), "value": val,
                     "limit": 1.0 / v, "discrepancy": abs(val - 1.0 / v)})
    table = ConvergenceTable("fastjump", {"phi": phi.name, "x": x, "v": v}, rows)
    table.checks["monotone_trend"] = table.monotone_trend
    return table


def mc_generator_subordinator(phi, f: TestFunction, t, x, h=1e-3, n=200000, seed=0):
    """Difference quotient (P_h f(x) - f(x)) / h for the renormalised subordinator.

    The jump count over renormalised time h is Poisson(t h m) with m the
    total mass of the (finite) jump measure; the one- and two-jump terms are
    estimated by Monte Carlo and weighted with their exact probabilities.
    Returns (estimate, standard error).
    """
    form = phi.equivalent
    nu = phi.jump_measure
    m = nu.total_mass
    if not np.isfinite(m) or phi.beta != 0:
        raise ValueError("needs a finite jump measure and no drift")
    gen = RngStreamSpec(seed, 0).generator()
    lx = _logy_of_x(form, t, x) if x > 0 else -np.inf
    fx = float(f(x))

    def g_of(lsum):
        return np.array([1.0 / (t * float(form.H_logy(l))) for l in lsum])

    def jumps_log(k):
        z = nu.inverse_tail_lnln(m * (1.0 - gen.random((n, k))))
        from .._logscale import logy_from_lnln
        return logy_from_lnln(z)

    lam = t * h * m
    est, var = 0.0, 0.0
    for k in (1, 2):
        lj = jumps_log(k)
        tot = np.logaddexp.reduce(np.column_stack([lj, np.full(n, lx)]), axis=1)
        vals = f(g_of(tot)) - fx
        pk = math.exp(-lam) * lam**k / math.factorial(k)
        est += pk * vals.mean()
        var += pk * pk * vals.var() / n
    return est / h, math.sqrt(var) / h
