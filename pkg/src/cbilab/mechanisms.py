"""Branching and immigration mechanisms, their Lévy measures and presets.

A branching mechanism is

    Psi(q) = b q + sigma2/2 q^2 + int (exp(-q x) - 1 + q x) pi(dx)

and an immigration mechanism (Laplace exponent of a subordinator) is

    Phi(q) = beta q + int (1 - exp(-q x)) nu(dx).

Measures are described by their tails ``m(u) = m((u, inf))``. Without a
closed form the integrals are evaluated in tail form,

    Psi(q) - b q - sigma2/2 q^2 = q int (1 - exp(-q u)) pi_tail(u) du,
    Phi(q) - beta q             = q int exp(-q u) nu_tail(u) du,

with adaptive Gauss-Kronrod quadrature on log-spaced panels.

Slowly varying presets (Log, Super-log, Sub-log) are defined by a tail
profile ``A`` evaluated at ``L = ln(1 + u)``. The profile read literally
is not a Lévy measure (it behaves like 1/u or worse at 0), so the measure
keeps only jumps of size at least ``u_min``; the tail is flat below it.
The same profile read as ``F(x) = A(ln(1 + 1/x))`` is a closed-form
increasing function equivalent to Phi at 0, used for renormalisation and
generator numerics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from ._logscale import logy_from_lnln


class IntegrabilityError(ValueError):
    """A Lévy integral diverged or the measure violates its moment condition."""


class RangeError(ValueError):
    """Requested value lies outside the range of a monotone function."""


class ProbeError(ValueError):
    """Regular-variation probe hit a non-finite or non-positive value."""


# --------------------------------------------------------------------------
# quadrature


def halfline_quad(h, scale=1.0, breakpoints=(), rtol=1e-11):
    """Integrate ``h`` over (0, inf) on log-spaced panels around ``scale``.

    Panels are decades ``scale * 10**k`` for k in [-14, 8], plus the
    splitting point 1 and any ``breakpoints``. Past the last decade the
    integral is continued in ``ln u`` until the panel contributions vanish.
    """
    edges = set(scale * 10.0 ** np.arange(-14, 9))
    edges.add(1.0)
    edges.update(float(b) for b in breakpoints if 0 < b < np.inf)
    edges = np.array(sorted(e for e in edges if 0 < e < 1e300))
    total, err = 0.0, 0.0
    pieces = [(0.0, edges[0])] + list(zip(edges[:-1], edges[1:]))
    # beyond the last edge integrate in s = ln u, where slowly decaying
    # tails become exponentially decaying
    top = math.log(edges[-1])
    h_log = lambda s: h(math.exp(s)) * math.exp(s) if s < 700 else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in pieces:
            val, e = integrate.quad(h, a, b, epsabs=0.0, epsrel=rtol, limit=200)
            total += val
            err += e
        for a, b in zip(top + 5.0 * np.arange(0, 140), top + 5.0 * np.arange(1, 141)):
            val, e = integrate.quad(h_log, a, b, epsabs=0.0, epsrel=rtol, limit=200)
            total += val
            err += e
            if abs(val) <= 1e-17 * abs(total):
                break
    if not np.isfinite(total):
        raise IntegrabilityError("Lévy integral is not finite")
    if err > max(1e-7 * abs(total), 1e-300):
        raise IntegrabilityError(
            f"quadrature did not converge (value {total:.6g}, error {err:.3g})")
    return total


# --------------------------------------------------------------------------
# tail profiles for slowly varying presets; all are functions of L = ln(1+u)


class LogProfile:
    """A(L) = c / L."""

    def __init__(self, c=1.0):
        self.c = float(c)

    def A(self, L):
        return self.c / L

    def dA(self, L):
        return -self.c / L**2

    def d2A(self, L):
        return 2.0 * self.c / L**3

    def A_inv(self, v):
        return self.c / v

    def logA_inv(self, v):
        return np.log(self.c / v)

    def A_from_logL(self, zL):
        return self.c * np.exp(-zL)


class IterLogProfile:
    """A(L) = 1 / ln(1 + L)."""

    def A(self, L):
        return 1.0 / np.log1p(L)

    def dA(self, L):
        M = np.log1p(L)
        return -1.0 / ((1.0 + L) * M**2)

    def d2A(self, L):
        M = np.log1p(L)
        return (M + 2.0) / ((1.0 + L) ** 2 * M**3)

    def A_inv(self, v):
        with np.errstate(over="ignore"):
            return np.expm1(1.0 / v)

    def logA_inv(self, v):
        # log(expm1(1/v)) without overflow
        r = 1.0 / np.asarray(v, dtype=float)
        with np.errstate(over="ignore", divide="ignore"):
            return np.where(r > 30.0, r + np.log1p(-np.exp(-np.minimum(r, 1e300))),
                            np.log(np.expm1(np.minimum(r, 30.0))))

    def A_from_logL(self, zL):
        return 1.0 / np.logaddexp(0.0, zL)


class SublogProfile:
    """A(L) = 1 / L^2."""

    def A(self, L):
        return L**-2.0

    def dA(self, L):
        return -2.0 * L**-3.0

    def d2A(self, L):
        return 6.0 * L**-4.0

    def A_inv(self, v):
        return v**-0.5

    def logA_inv(self, v):
        return -0.5 * np.log(v)

    def A_from_logL(self, zL):
        return np.exp(-2.0 * zL)


class DeltaProfile:
    """A(L) = ln(1 + w) / w^delta with w = L + shift.

    For delta < 1 the raw profile increases for small w; ``shift`` moves the
    argument past the maximum so that A is decreasing on [0, inf).
    """

    def __init__(self, delta=1.0):
        if not 0.0 < delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        self.delta = float(delta)
        if delta == 1.0:
            self.shift = 0.0
        else:
            self.shift = optimize.brentq(
                lambda w: w / (1.0 + w) - delta * np.log1p(w), 1e-6, 1e6)

    def A(self, L):
        w = L + self.shift
        return np.log1p(w) * w**-self.delta

    def dA(self, L):
        w = L + self.shift
        d = self.delta
        return w**-d / (1.0 + w) - d * np.log1p(w) * w ** (-d - 1.0)

    def d2A(self, L):
        w = L + self.shift
        d = self.delta
        return (-(w**-d) / (1.0 + w) ** 2 - 2.0 * d * w ** (-d - 1.0) / (1.0 + w)
                + d * (d + 1.0) * np.log1p(w) * w ** (-d - 2.0))

    def logA_inv(self, v):
        """log L solving A(L) = v, by vectorised bisection on log L."""
        v = np.asarray(v, dtype=float)
        p = np.atleast_1d(v).astype(float)
        f = lambda zL: self.A_from_logL(zL) - p
        lo = np.full(p.shape, -40.0)
        hi = np.ones(p.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            while True:
                grow = f(hi) > 0
                if not np.any(grow) or hi.max() > 1e300:
                    break
                hi = np.where(grow, hi * 2.0, hi)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                pos = f(mid) > 0
                lo = np.where(pos, mid, lo)
                hi = np.where(pos, hi, mid)
                if np.all(hi - lo <= 1e-14 * np.maximum(1.0, np.abs(hi))):
                    break
        out = np.where(p >= self.A0, -np.inf, 0.5 * (lo + hi))
        return out.reshape(v.shape)[()]

    @property
    def A0(self):
        # A(0), with ln(1+w)/w -> 1 at w = 0 when there is no shift
        return 1.0 if self.shift == 0.0 else float(self.A(0.0))

    def A_inv(self, v):
        with np.errstate(over="ignore"):
            return np.exp(self.logA_inv(v))

    def A_from_logL(self, zL):
        if self.shift == 0.0:
            logw = zL
        else:
            logw = np.logaddexp(zL, math.log(self.shift))
        return np.logaddexp(0.0, logw) * np.exp(-self.delta * logw)


# --------------------------------------------------------------------------
# Lévy measures


class LevyMeasure:
    """Measure on (0, inf) described by its tail.

    Subclasses implement ``tail`` and ``inverse_tail``; the generalized
    inverse is ``inf{u > 0 : tail(u) < p}``.
    """

    total_mass = np.inf
    breakpoints = ()
    finite_small_moment = True  # int_0^1 u m(du) < inf
    log_moment = True           # int_1^inf ln u m(du) < inf

    def tail(self, u):
        raise NotImplementedError

    def inverse_tail(self, p):
        raise NotImplementedError

    def density(self, u):
        return None

    def log_density(self, lu):
        """log of the density at u = exp(lu)."""
        with np.errstate(divide="ignore", over="ignore"):
            return np.log(self.density(np.exp(lu)))

    def log_second_moment(self, lC):
        """log int_0^C u^2 m(du) with C = exp(lC)."""
        C = math.exp(min(lC, 700.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val = sum(integrate.quad(lambda u: u * u * float(self.density(u)), a, b, limit=200)[0]
                      for a, b in [(0.0, min(C, 1.0)), (min(C, 1.0), C)] if b > a)
        return math.log(val) if val > 0 else -np.inf

    def tail_log(self, la):
        """tail(exp(la)), for arguments beyond float range."""
        with np.errstate(over="ignore"):
            return self.tail(np.exp(la))

    def inverse_tail_lnln(self, p):
        """log(ln(1 + inverse_tail(p))), the storage code used by samplers."""
        with np.errstate(divide="ignore"):
            return np.log(np.log1p(self.inverse_tail(p)))

    def truncated_mass(self, eps):
        return float(self.tail(eps))

    def truncated_mean(self, eps):
        """int_0^eps u m(du) = int_0^eps tail(u) du - eps * tail(eps)."""
        if eps <= 0:
            return 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda u: float(self.tail(u)), 0.0, eps,
                                    epsabs=0.0, epsrel=1e-10, limit=200)
        return val - eps * float(self.tail(eps))


class ZeroMeasure(LevyMeasure):
    total_mass = 0.0

    def tail(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))[()]

    def inverse_tail(self, p):
        return np.zeros_like(np.asarray(p, dtype=float))[()]


class ExponentialTail(LevyMeasure):
    """tail(u) = mass * exp(-rate * u)."""

    def __init__(self, mass=1.0, rate=1.0):
        self.mass = float(mass)
        self.rate = float(rate)
        self.total_mass = self.mass

    def tail(self, u):
        return self.mass * np.exp(-self.rate * np.asarray(u, dtype=float))

    def density(self, u):
        return self.rate * self.tail(u)

    def log_density(self, lu):
        with np.errstate(over="ignore"):
            return math.log(self.rate * self.mass) - self.rate * np.exp(lu)

    def log_second_moment(self, lC):
        # int_0^C u^2 rate mass e^{-rate u} du, capped where the tail is negligible
        return super().log_second_moment(min(lC, math.log(800.0 / self.rate)))

    def inverse_tail(self, p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(p >= self.mass, 0.0, np.log(self.mass / p) / self.rate)
        return out[()]


class PowerTail(LevyMeasure):
    """tail(u) = coef * u^(-index)."""

    def __init__(self, coef, index):
        self.coef = float(coef)
        self.index = float(index)
        self.finite_small_moment = self.index < 1.0

    def tail(self, u):
        with np.errstate(divide="ignore"):
            return self.coef * np.asarray(u, dtype=float) ** -self.index

    def density(self, u):
        return self.index * self.coef * np.asarray(u, dtype=float) ** (-self.index - 1.0)

    def log_density(self, lu):
        return math.log(self.index * self.coef) - (self.index + 1.0) * np.asarray(lu, dtype=float)

    def log_second_moment(self, lC):
        if self.index >= 2.0:
            return np.inf
        return math.log(self.index * self.coef / (2.0 - self.index)) + (2.0 - self.index) * lC

    def inverse_tail(self, p):
        return (self.coef / np.asarray(p, dtype=float)) ** (1.0 / self.index)

    def truncated_mean(self, eps):
        a = self.index
        if a >= 1.0:
            return np.inf
        return self.coef * a / (1.0 - a) * eps ** (1.0 - a)


class ProfileTail(LevyMeasure):
    """tail(u) = A(ln(1 + max(u, u_min))): the profile restricted to jumps >= u_min."""

    log_moment = False

    def __init__(self, profile, u_min=1.0):
        self.profile = profile
        self.u_min = float(u_min)
        self.L_min = math.log1p(self.u_min)
        self.total_mass = float(profile.A(self.L_min))
        self.breakpoints = (self.u_min,)

    def tail(self, u):
        u = np.asarray(u, dtype=float)
        return self.profile.A(np.log1p(np.maximum(u, self.u_min)))

    def tail_log(self, la):
        la = np.maximum(np.asarray(la, dtype=float), math.log(self.u_min))
        return self.profile.A(np.logaddexp(0.0, la))

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u < self.u_min, 0.0,
                        -self.profile.dA(np.log1p(u)) / (1.0 + u))

    def _inverse_logL(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        inside = p <= self.total_mass
        zL = np.full(p.shape, -np.inf)
        if np.any(inside):
            zL[inside] = np.maximum(self.profile.logA_inv(p[inside]), math.log(self.L_min))
        return zL

    def inverse_tail(self, p):
        with np.errstate(over="ignore"):
            out = np.expm1(np.exp(self._inverse_logL(p)))
        return out[()] if np.ndim(p) else out[0]

    def inverse_tail_lnln(self, p):
        out = self._inverse_logL(p)
        return out[()] if np.ndim(p) else out[0]

    def truncated_mean(self, eps):
        return 0.0 if eps <= self.u_min else super().truncated_mean(eps)


# --------------------------------------------------------------------------
# closed forms F equivalent to Phi at 0, viewed through H(y) = F(1/y)


class ProfileForm:
    """F(x) = A(ln(1 + 1/x)), i.e. H(y) = A(ln(1 + y))."""

    def __init__(self, profile):
        self.profile = profile

    def H_logy(self, ly):
        return self.profile.A(np.logaddexp(0.0, ly))

    def yH1_logy(self, ly):
        return self.profile.dA(np.logaddexp(0.0, ly)) * special.expit(ly)

    def y2H2_logy(self, ly):
        L = np.logaddexp(0.0, ly)
        e = special.expit(ly)
        return e * e * (self.profile.d2A(L) - self.profile.dA(L))

    def logy_of_H(self, v):
        """log y solving H(y) = v."""
        with np.errstate(divide="ignore"):
            return logy_from_lnln(self.profile.logA_inv(v))

    def recip_H_lnln(self, z):
        """1 / H(y) from the storage code z = log ln(1 + y)."""
        with np.errstate(over="ignore", divide="ignore"):
            return 1.0 / self.profile.A_from_logL(z)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.profile.A(np.log1p(1.0 / x))

    def derivative(self, x, order=1):
        x = np.asarray(x, dtype=float)
        ly = -np.log(x)
        yH1 = self.yH1_logy(ly)
        if order == 1:
            return -yH1 / x
        return (2.0 * yH1 + self.y2H2_logy(ly)) / x**2

    def inverse(self, v):
        with np.errstate(over="ignore"):
            return 1.0 / np.expm1(self.profile.A_inv(v))


class PowerForm:
    """F(x) = d x^beta."""

    def __init__(self, d, beta):
        self.d = float(d)
        self.beta = float(beta)

    def H_logy(self, ly):
        return self.d * np.exp(-self.beta * ly)

    def yH1_logy(self, ly):
        return -self.beta * self.H_logy(ly)

    def y2H2_logy(self, ly):
        return self.beta * (self.beta + 1.0) * self.H_logy(ly)

    def logy_of_H(self, v):
        return -np.log(np.asarray(v, dtype=float) / self.d) / self.beta

    def recip_H_lnln(self, z):
        with np.errstate(over="ignore"):
            return np.exp(self.beta * logy_from_lnln(z)) / self.d

    def __call__(self, x):
        return self.d * np.asarray(x, dtype=float) ** self.beta

    def derivative(self, x, order=1):
        x = np.asarray(x, dtype=float)
        b = self.beta
        if order == 1:
            return self.d * b * x ** (b - 1.0)
        return self.d * b * (b - 1.0) * x ** (b - 2.0)

    def inverse(self, v):
        return (np.asarray(v, dtype=float) / self.d) ** (1.0 / self.beta)


class RationalForm:
    """F(x) = a x / (r + x), the exponent of exponential jumps."""

    def __init__(self, a, r=1.0):
        self.a = float(a)
        self.r = float(r)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.a * x / (self.r + x)

    def derivative(self, x, order=1):
        x = np.asarray(x, dtype=float)
        if order == 1:
            return self.a * self.r / (self.r + x) ** 2
        return -2.0 * self.a * self.r / (self.r + x) ** 3

    def inverse(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v >= self.a):
            raise RangeError("value above sup Phi")
        return self.r * v / (self.a - v)

    def H_logy(self, ly):
        return self(np.exp(-np.asarray(ly, dtype=float)))

    def yH1_logy(self, ly):
        x = np.exp(-np.asarray(ly, dtype=float))
        return -self.derivative(x) * x

    def y2H2_logy(self, ly):
        x = np.exp(-np.asarray(ly, dtype=float))
        return 2.0 * self.derivative(x) * x + self.derivative(x, 2) * x * x

    def logy_of_H(self, v):
        return -np.log(self.inverse(v))

    def recip_H_lnln(self, z):
        return 1.0 / self.H_logy(logy_from_lnln(z))


# --------------------------------------------------------------------------
# mechanisms


@dataclass(frozen=True, eq=False)
class BranchingMechanism:
    """Psi(q) = b q + sigma2/2 q^2 + int (e^{-qx} - 1 + qx) pi(dx).

    ``family`` selects closed forms for Psi, its derivatives and the
    cumulant flow: ``zero``, ``linear``, ``feller``, ``stable``,
    ``rational`` or ``custom``.
    """

    b: float = 0.0
    sigma2: float = 0.0
    jump_measure: LevyMeasure = field(default_factory=ZeroMeasure)
    family: str = "custom"
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")

    @property
    def has_jumps(self):
        return not isinstance(self.jump_measure, ZeroMeasure)

    @property
    def is_zero(self):
        return self.b == 0 and self.sigma2 == 0 and not self.has_jumps

    def closed_form(self, q):
        """(Psi, Psi', Psi'') at q, or None without a closed form."""
        q = float(q)
        p = self.params
        fam = self.family
        if fam in ("zero", "linear", "feller") or (fam == "custom" and not self.has_jumps):
            return (self.b * q + 0.5 * self.sigma2 * q * q,
                    self.b + self.sigma2 * q, self.sigma2)
        if fam == "stable":
            d, a = p["d"], p["alpha"]
            return (d * q ** (1 + a), d * (1 + a) * q**a,
                    d * (1 + a) * a * q ** (a - 1) if q > 0 else (2 * d if a == 1 else np.inf))
        if fam == "rational":
            d = p["d"]
            return (d * q * q / (1 + q), d * q * (2 + q) / (1 + q) ** 2,
                    2 * d / (1 + q) ** 3)
        return None

    def __call__(self, q):
        return psi_eval(self, q)


@dataclass(frozen=True, eq=False)
class ImmigrationMechanism:
    """Phi(q) = beta q + int (1 - e^{-qx}) nu(dx).

    ``equivalent`` is a closed-form increasing function equivalent to Phi at
    0; ``exact`` says whether it coincides with Phi everywhere.
    """

    beta: float = 0.0
    jump_measure: LevyMeasure = field(default_factory=ZeroMeasure)
    equivalent: object = None
    exact: bool = False
    log_moment: bool = True
    family: str = "custom"
    params: dict = field(default_factory=dict)
    name: str = ""
    regime: str = ""
    rv_index: float = float("nan")
    log_limit: float = float("nan")

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def sup(self):
        """Phi(inf)."""
        if self.beta > 0:
            return np.inf
        return self.jump_measure.total_mass

    def __call__(self, q):
        return phi_eval(self, q)


def _psi_quadrature(mech, q):
    if q == 0 or not mech.has_jumps:
        return 0.0
    tail = mech.jump_measure.tail
    h = lambda u: q * (-math.expm1(-q * u)) * float(tail(u))
    return halfline_quad(h, scale=1.0 / q, breakpoints=mech.jump_measure.breakpoints)


def psi_eval(mech, q, use_closed=True):
    """Evaluate the branching mechanism at q >= 0."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if use_closed:
        cf = mech.closed_form(q)
        if cf is not None:
            return float(cf[0])
    return mech.b * q + 0.5 * mech.sigma2 * q * q + _psi_quadrature(mech, q)


def _phi_quadrature(mech, q):
    m = mech.jump_measure
    if q == 0 or isinstance(m, ZeroMeasure):
        return 0.0
    h = lambda u: q * math.exp(-q * u) * float(m.tail(u))
    return halfline_quad(h, scale=1.0 / q, breakpoints=m.breakpoints)


def phi_eval(mech, q, use_closed=True):
    """Evaluate the immigration mechanism at q >= 0.

    Uses the closed form only when it is exact; otherwise integrates the
    tail of the jump measure.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    if q == 0:
        return 0.0
    if use_closed and mech.exact and mech.equivalent is not None:
        return float(mech.equivalent(q))
    return mech.beta * q + _phi_quadrature(mech, q)


def phi_inverse(mech, y, use_equivalent=False, rtol=1e-10):
    """q >= 0 with Phi(q) = y, by bracketing on log q and bisection.

    With ``use_equivalent`` the closed-form equivalent F is inverted instead
    of Phi itself.
    """
    if y < 0:
        raise ValueError("y must be nonnegative")
    if y == 0:
        return 0.0
    closed = use_equivalent or mech.exact
    if closed:
        if mech.equivalent is None:
            raise ValueError("mechanism has no closed form")
        return float(mech.equivalent.inverse(y))
    if y >= mech.sup:
        raise RangeError(f"y={y} is not below sup Phi = {mech.sup}")
    f = lambda s: phi_eval(mech, math.exp(s)) - y
    lo, hi = -1.0, 1.0
    while f(lo) > 0:
        lo *= 2.0
        if lo < math.log(1e-300):
            lo = math.log(1e-300)
            if f(lo) > 0:
                raise RangeError("y below Phi(1e-300)")
            break
    while f(hi) < 0:
        hi *= 2.0
        if hi > math.log(1e300):
            raise RangeError("y above Phi(1e300)")
    s = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    q = math.exp(s)
    if abs(phi_eval(mech, q) - y) > rtol * y:
        # secant polish on q itself
        q = optimize.brentq(lambda x: phi_eval(mech, x) - y, q * (1 - 1e-6), q * (1 + 1e-6),
                            xtol=0.0, rtol=4 * np.finfo(float).eps)
    return q


def nu_tail(mech, u):
    if np.any(np.asarray(u) <= 0):
        raise ValueError("u must be positive")
    return mech.jump_measure.tail(u)


def nu_tail_inverse(mech, p):
    if np.any(np.asarray(p) <= 0):
        raise ValueError("p must be positive")
    return mech.jump_measure.inverse_tail(p)


# --------------------------------------------------------------------------
# regular variation


@dataclass
class RvProbe:
    index: float
    dispersion: float
    level: float
    trend: float   # f(x_last) / f(x_first) along the probe
    per_point: np.ndarray


def rv_index_probe(f, at="infinity", points=None, lambdas=(2.0, 4.0, 8.0)):
    """Estimate the regular-variation index of ``f`` at 0 or infinity.

    For each probe point x the ratios ln(f(lam x)/f(x)) / ln(lam) are
    averaged over ``lambdas``; the estimate is taken at the most extreme
    point and the dispersion is the spread over the last three points.
    """
    if points is None:
        points = 10.0 ** np.arange(2, 9) if at == "infinity" else 10.0 ** -np.arange(2, 9)
    points = np.asarray(points, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    fx = np.array([f(x) for x in points], dtype=float)
    if at == "zero":
        flx = np.array([[f(x / l) for l in lam] for x in points], dtype=float)
    else:
        flx = np.array([[f(x * l) for l in lam] for x in points], dtype=float)
    if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(flx))
            and np.all(fx > 0) and np.all(flx > 0)):
        raise ProbeError("f must be finite and positive on the probe range")
    ratios = np.log(flx / fx[:, None]) / np.log(lam)[None, :]
    if at == "zero":
        ratios = -ratios
    per = ratios.mean(axis=1)
    return RvProbe(index=float(per[-1]), dispersion=float(np.ptp(per[-3:])),
                   level=float(fx[-1]), trend=float(fx[-1] / fx[0]), per_point=per)


def classify_regime(mech):
    """Log / Super-log / Sub-log from x -> x Phi(e^{-x}) using the closed equivalent."""
    form = mech.equivalent
    f = lambda x: x * float(form.H_logy(x))
    pr = rv_index_probe(f, at="infinity", points=10.0 ** np.arange(2, 7))
    if pr.index > 0.05:
        return "Super-log", pr
    if pr.index < -0.05 or pr.trend < 0.5:
        return "Sub-log", pr
    if pr.trend > 1.1:
        return "Super-log", pr
    return "Log", pr


# --------------------------------------------------------------------------
# presets


def linear(b=1.0):
    return BranchingMechanism(b=float(b), family="linear", params={"b": b}, name="linear")


def feller(b=1.0, sigma2=2.0):
    return BranchingMechanism(b=float(b), sigma2=float(sigma2), family="feller",
                              params={"b": b, "sigma2": sigma2}, name="feller")


def zero_branching():
    return BranchingMechanism(family="zero", name="zero")


def stable_branching(d=1.0, alpha=1.0):
    """Psi(x) = d x^(1+alpha), alpha in (0, 1]."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1:
        return BranchingMechanism(sigma2=2.0 * d, family="stable",
                                  params={"d": d, "alpha": alpha}, name="stable_branching")
    m = PowerTail(d * alpha / special.gamma(1 - alpha), 1 + alpha)
    return BranchingMechanism(jump_measure=m, family="stable",
                              params={"d": d, "alpha": alpha}, name="stable_branching")


def rational_branching(d=1.0):
    """Psi(x) = d x^2 / (1 + x): exponential branching jumps, ~ d x^2 at 0."""
    return BranchingMechanism(jump_measure=ExponentialTail(d, 1.0), family="rational",
                              params={"d": d}, name="rational_branching")


def exp_tail_branching(mass=1.0):
    """Psi from pi_tail(u) = mass e^{-u} with b = sigma = 0 (no closed form used)."""
    return BranchingMechanism(jump_measure=ExponentialTail(mass, 1.0), family="custom",
                              params={"mass": mass}, name="exp_tail_branching")


def stable_immigration(dprime=1.0, beta=0.5):
    """Phi(x) = d' x^beta, beta in (0, 1]."""
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    params = {"dprime": dprime, "beta": beta}
    form = PowerForm(dprime, beta)
    if beta == 1:
        return ImmigrationMechanism(beta=float(dprime), equivalent=form, exact=True,
                                    family="stable", params=params, name="stable_immigration",
                                    regime="linear (log moment)", rv_index=1.0)
    m = PowerTail(dprime / special.gamma(1 - beta), beta)
    return ImmigrationMechanism(jump_measure=m, equivalent=form, exact=True, family="stable",
                                params=params, name="stable_immigration",
                                regime="linear (log moment)", rv_index=float(beta))


def exp_immigration(mass=1.0, rate=1.0):
    """nu_tail(u) = mass e^{-rate u}; Phi(x) = mass x / (rate + x)."""
    return ImmigrationMechanism(jump_measure=ExponentialTail(mass, rate),
                                equivalent=RationalForm(mass, rate), exact=True,
                                family="exponential", params={"mass": mass, "rate": rate},
                                name="exp_immigration", regime="finite mean", rv_index=1.0)


def _profile_immigration(profile, name, regime, u_min, params, log_limit):
    return ImmigrationMechanism(jump_measure=ProfileTail(profile, u_min),
                                equivalent=ProfileForm(profile), exact=False,
                                log_moment=False, family="profile", params=params,
                                name=name, regime=regime, rv_index=0.0,
                                log_limit=log_limit)


def log_immigration(c=1.0, u_min=1.0):
    """Log regime: nu_tail(u) = c / ln(1 + u) beyond u_min, F(x) = c / ln(1 + 1/x)."""
    return _profile_immigration(LogProfile(c), "log_immigration", "Log", u_min,
                                {"c": c, "u_min": u_min}, float(c))


def superlog_iterlog(u_min=1.0):
    """Super-log: nu_tail(u) = 1 / ln(1 + ln(1 + u)) beyond u_min."""
    return _profile_immigration(IterLogProfile(), "superlog_iterlog", "Super-log", u_min,
                                {"u_min": u_min}, np.inf)


def superlog_delta(delta=1.0, u_min=1.0):
    """Super-log: nu_tail(u) = ln(1 + ln(1 + u)) / ln(1 + u)^delta beyond u_min."""
    return _profile_immigration(DeltaProfile(delta), "superlog_delta", "Super-log", u_min,
                                {"delta": delta, "u_min": u_min}, np.inf)


def sublog(u_min=1.0):
    """Sub-log negative control: nu_tail(u) = 1 / ln(1 + u)^2 beyond u_min."""
    return _profile_immigration(SublogProfile(), "sublog", "Sub-log (no convergence)", u_min,
                                {"u_min": u_min}, 0.0)


BRANCHING_PRESETS = {
    "zero": zero_branching,
    "linear": linear,
    "feller": feller,
    "stable_branching": stable_branching,
    "rational_branching": rational_branching,
    "exp_tail_branching": exp_tail_branching,
}

IMMIGRATION_PRESETS = {
    "stable_immigration": stable_immigration,
    "exp_immigration": exp_immigration,
    "log_immigration": log_immigration,
    "superlog_iterlog": superlog_iterlog,
    "superlog_delta": superlog_delta,
    "sublog": sublog,
}


def make_preset(name, **params):
    """Build a preset mechanism by name."""
    if name in BRANCHING_PRESETS:
        return BRANCHING_PRESETS[name](**params)
    if name in IMMIGRATION_PRESETS:
        return IMMIGRATION_PRESETS[name](**params)
    raise KeyError(f"unknown mechanism preset: {name!r}")


def verify_integrability(mech):
    """Check the Lévy integrability condition of a mechanism's measure by quadrature."""
    m = mech.jump_measure
    if isinstance(m, ZeroMeasure):
        return 0.0
    if isinstance(mech, BranchingMechanism):
        h = lambda u: float(m.tail(u)) * (2.0 * u if u < 1 else 1.0)   # int u^u^2 = int tail*(2u ^ 1)
    else:
        h = lambda u: float(m.tail(u)) if u < 1 else 0.0
    return halfline_quad(h, breakpoints=m.breakpoints + (1.0,))
