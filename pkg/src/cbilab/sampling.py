"""Path samplers for subordinators, CB and CBI processes, and ESN processes.

Values are carried as storage codes ``z = log(log1p(y))`` (see
``_logscale``) because Log and Super-log populations overflow float64
long before desk-scale horizons end.

Samplers take an ``RngStreamSpec`` and are deterministic functions of it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from ._logscale import (Z_BIG, lnln_from_logy, lnln_from_value, lnln_scale,
                        logy_from_lnln, value_from_lnln)
from .mechanisms import BranchingMechanism, ImmigrationMechanism, ZeroMeasure
from .rng import RngStreamSpec, map_streams


class CapabilityError(ValueError):
    """The requested process has no exact sampler here; use the transform oracle."""


class TruncationError(ValueError):
    """Truncation level leaves infinitely many jumps."""


@dataclass
class PathSample:
    """A path observed on a time grid.

    Attributes
    ----------
    times : increasing grid
    codes : storage codes log(log1p(value)) at the grid times
    atom_times, atom_codes : jump or immigration record (codes as above)
    meta : seed, stream, truncation level and sampler-specific flags
    """

    times: np.ndarray
    codes: np.ndarray
    atom_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    atom_codes: np.ndarray = field(default_factory=lambda: np.empty(0))
    meta: dict = field(default_factory=dict)

    @property
    def values(self):
        return value_from_lnln(self.codes)

    @property
    def log_values(self):
        return logy_from_lnln(self.codes)

    @property
    def atoms(self):
        return list(zip(self.atom_times.tolist(), value_from_lnln(self.atom_codes).tolist()))


def _grid(times, T=None):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be a nonempty strictly increasing grid in [0, inf)")
    if T is not None and times[-1] > T * (1 + 1e-12):
        raise ValueError("grid extends beyond the horizon")
    return times


def cumulative_codes(atom_times, atom_codes, times):
    """Codes of sum_{u_i <= t} x_i at each grid time t."""
    order = np.argsort(atom_times, kind="stable")
    at, az = atom_times[order], atom_codes[order]
    out = np.full(times.shape, -np.inf)
    if at.size == 0:
        return out
    ly = logy_from_lnln(az)
    with np.errstate(invalid="ignore"):
        acc = np.logaddexp.accumulate(ly)
    runmax = np.maximum.accumulate(az)
    cum = np.where(runmax > Z_BIG, runmax, lnln_from_logy(acc))
    idx = np.searchsorted(at, times, side="right") - 1
    have = idx >= 0
    out[have] = cum[idx[have]]
    return out


def add_drift(codes, times, rate):
    """Add ``rate * t`` to the values encoded by ``codes``."""
    if rate <= 0:
        return codes
    ly = logy_from_lnln(codes)
    with np.errstate(divide="ignore"):
        dl = np.log(rate * times)
    out = np.where(codes > Z_BIG, codes, lnln_from_logy(np.logaddexp(ly, dl)))
    return out


def default_eps(measure, T):
    """Truncation level: exact for finite measures, else tail(eps) * T = 1e6."""
    if np.isfinite(measure.total_mass):
        return 0.0
    return float(measure.inverse_tail(1e6 / max(T, 1.0)))


def _jump_layer(measure, T, eps, gen):
    mass = measure.total_mass if eps == 0 else float(measure.truncated_mass(eps))
    if not np.isfinite(mass):
        raise TruncationError("tail(eps) is infinite; raise eps")
    n = gen.poisson(T * mass) if mass > 0 else 0
    times = T * (1.0 - gen.random(n))
    codes = measure.inverse_tail_lnln(mass * (1.0 - gen.random(n)))
    return times, np.atleast_1d(codes)


def sample_subordinator(phi: ImmigrationMechanism, T: float, grid=None, eps=None,
                        rng: RngStreamSpec = RngStreamSpec(0), keep_atoms=True) -> PathSample:
    """Subordinator path: drift plus compound-Poisson jumps of size >= eps.

    Jumps below ``eps`` are replaced by their mean, added to the drift.
    ``keep_atoms=False`` drops the jump record to save memory.
    """
    times = _grid(T if grid is None else grid, T)
    m = phi.jump_measure
    if eps is None:
        eps = default_eps(m, T)
    gen = rng.generator()
    if isinstance(m, ZeroMeasure):
        at, az = np.empty(0), np.empty(0)
        comp = 0.0
    else:
        at, az = _jump_layer(m, T, eps, gen)
        comp = m.truncated_mean(eps) if eps > 0 else 0.0
    codes = cumulative_codes(at, az, times)
    codes = add_drift(codes, times, phi.beta + comp)
    meta = {"seed": rng.seed, "stream": rng.stream, "eps": eps, "compensation": comp}
    if not keep_atoms:
        at, az = np.empty(0), np.empty(0)
    return PathSample(times, codes, at, az, meta)


# --------------------------------------------------------------------------
# CB transitions on storage codes


_EXACT_POISSON_MEAN = 1e12


def cb_step(psi: BranchingMechanism, codes, h, gen):
    """Advance independent CB(psi) states by times ``h`` (scalar or per state)."""
    codes = np.asarray(codes, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), codes.shape)
    if psi.is_zero or psi.family == "zero":
        return codes.copy()
    if psi.has_jumps:
        raise CapabilityError("exact CB sampling covers the linear and Feller families only; "
                              "use laplace_cbi for other mechanisms")
    b, s2 = psi.b, psi.sigma2
    if s2 == 0:
        return lnln_scale(codes, -b * h)
    out = codes.copy()
    alive = np.isfinite(codes)
    if not np.any(alive):
        return out
    z, hh = codes[alive], h[alive]
    if b == 0:
        log_rho = np.log(2.0 / (s2 * hh))
    else:
        log_rho = np.log(2.0 * b / (s2 * -np.expm1(-b * hh)))
    logx = logy_from_lnln(z)
    log_mean = log_rho + logx - b * hh          # Poisson mean, log scale
    new = np.empty_like(z)
    small = log_mean <= math.log(_EXACT_POISSON_MEAN)
    if np.any(small):
        n = gen.poisson(np.exp(log_mean[small]))
        x = gen.gamma(np.where(n > 0, n, 1.0)) / np.exp(log_rho[small])
        new[small] = np.where(n > 0, lnln_from_value(x), -np.inf)
    big = ~small
    if np.any(big):
        # Poisson-Gamma mixture with huge mean: relative sd sqrt(2/mean)
        zn = gen.standard_normal(int(big.sum()))
        rel = np.log1p(np.sqrt(2.0) * np.exp(-0.5 * log_mean[big]) * zn)
        new[big] = lnln_scale(z[big], -b * hh[big] + rel)
    out[alive] = new
    return out


def sample_cb(psi: BranchingMechanism, x0: float, T: float, grid=None,
              rng: RngStreamSpec = RngStreamSpec(0)) -> PathSample:
    """CB path from x0 by exact transitions between grid times."""
    times = _grid(T if grid is None else grid, T)
    gen = rng.generator()
    z = np.array([lnln_from_value(x0)])
    codes = np.empty(times.size)
    prev = 0.0
    for k, t in enumerate(times):
        if t > prev:
            z = cb_step(psi, z, t - prev, gen)
        codes[k] = z[0]
        prev = t
    return PathSample(times, codes, meta={"seed": rng.seed, "stream": rng.stream})


def sample_cbi_shotnoise(psi: BranchingMechanism, phi: ImmigrationMechanism, T: float,
                         grid=None, eps=None, rng: RngStreamSpec = RngStreamSpec(0),
                         keep_atoms=True) -> PathSample:
    """CBI path started at 0 as a sum of independent CB grafts of immigrant mass.

    Each immigrant arriving at time u with mass x contributes a CB(psi)
    path started from x at time u. Grafts are propagated only between
    grid times.
    """
    if phi.beta > 0:
        raise CapabilityError("shot-noise construction needs an immigration mechanism without drift")
    if psi.has_jumps and not (psi.is_zero or psi.family == "zero"):
        raise CapabilityError("grafts need a linear, Feller or zero branching mechanism")
    times = _grid(T if grid is None else grid, T)
    m = phi.jump_measure
    if eps is None:
        eps = default_eps(m, T)
    gen = rng.generator()
    if isinstance(m, ZeroMeasure):
        at, az = np.empty(0), np.empty(0)
    else:
        at, az = _jump_layer(m, T, eps, gen)
    order = np.argsort(at, kind="stable")
    at, az = at[order], az[order]
    codes = np.full(times.size, -np.inf)
    state = np.empty(0)
    prev, j = 0.0, 0
    for k, t in enumerate(times):
        if state.size:
            state = cb_step(psi, state, t - prev, gen)
        j_new = np.searchsorted(at, t, side="right")
        if j_new > j:
            born = cb_step(psi, az[j:j_new], t - at[j:j_new], gen)
            state = np.concatenate([state, born])
            j = j_new
        codes[k] = _code_sum(state)
        prev = t
    comp = m.truncated_mean(eps) if eps > 0 and not isinstance(m, ZeroMeasure) else 0.0
    meta = {"seed": rng.seed, "stream": rng.stream, "eps": eps,
            "small_immigration_bias": comp * T}
    if not keep_atoms:
        at, az = np.empty(0), np.empty(0)
    return PathSample(times, codes, at, az, meta)


def _code_sum(z):
    if z.size == 0:
        return -np.inf
    zmax = z.max()
    if zmax > Z_BIG:
        return float(zmax)
    with np.errstate(divide="ignore"):
        return float(lnln_from_logy(np.logaddexp.reduce(logy_from_lnln(z))))


# --------------------------------------------------------------------------
# extremal shot noise


class ReciprocalTail:
    """Intensity tail mu_tail(x) = c / x of the limiting point process."""

    def __init__(self, c=1.0):
        self.c = float(c)

    def tail(self, x):
        return self.c / np.asarray(x, dtype=float)

    def inverse_tail(self, p):
        return self.c / np.asarray(p, dtype=float)

    def void_exponent(self, y, h, gamma):
        """int_0^h mu_tail(y + gamma v) dv."""
        y = np.asarray(y, dtype=float)
        if gamma == 0:
            return self.c * h / y
        return self.c / gamma * np.log1p(gamma * h / y)

    def sup_quantile(self, u, h, gamma):
        """Inverse of y -> exp(-void_exponent(y, h, gamma)) at u in (0, 1)."""
        u = np.asarray(u, dtype=float)
        if gamma == 0:
            return self.c * h / -np.log(u)
        return gamma * h / np.expm1(-(gamma / self.c) * np.log(u))


def _generic_sup_quantile(mu_tail, u, h, gamma):
    def expo(y):
        with np.errstate(divide="ignore"):
            return integrate.quad(lambda v: float(mu_tail.tail(y + gamma * v)), 0.0, h)[0]
    lo_floor = max(-gamma * h, 0.0)
    out = np.empty(np.size(u))
    for i, ui in enumerate(np.atleast_1d(u)):
        target = -math.log(ui)
        lo, hi = lo_floor + 1e-12, lo_floor + 1.0
        while expo(hi) > target:
            hi *= 2.0
        out[i] = optimize.brentq(lambda y: expo(y) - target, lo, hi, xtol=1e-13)
    return out


def sample_esn_grid(gamma: float, mu_tail=None, times=(1.0,),
                    rng: RngStreamSpec = RngStreamSpec(0)) -> PathSample:
    """ESN path on a grid by exact sequential sampling.

    M at the first grid time is drawn from its marginal, then
    M(s + h) = max(M(s) - gamma h, Z_h) with Z_h the fresh supremum over
    (s, s + h], drawn by inverting its closed-form distribution.
    """
    mu_tail = ReciprocalTail() if mu_tail is None else mu_tail
    times = _grid(times)
    gen = rng.generator()
    u = 1.0 - gen.random(times.size)
    steps = np.diff(np.concatenate([[0.0], times]))
    vals = np.empty(times.size)
    m = -np.inf
    for k, h in enumerate(steps):
        if hasattr(mu_tail, "sup_quantile"):
            zh = float(mu_tail.sup_quantile(u[k], h, gamma))
        else:
            zh = float(_generic_sup_quantile(mu_tail, u[k], h, gamma)[0])
        m = max(m - gamma * h, zh)
        vals[k] = m
    return PathSample(times, lnln_from_value(vals),
                      meta={"seed": rng.seed, "stream": rng.stream, "gamma": gamma})


def esn_from_atoms(gamma, atom_times, marks, times):
    """M(s) = max over atoms with u <= s of (mark - gamma (s - u)); -inf if none."""
    atom_times = np.asarray(atom_times, dtype=float)
    marks = np.asarray(marks, dtype=float)
    times = np.asarray(times, dtype=float)
    out = np.full(times.size, -np.inf)
    for k, s in enumerate(times):
        sel = atom_times <= s
        if np.any(sel):
            out[k] = np.max(marks[sel] - gamma * (s - atom_times[sel]))
    return out


def sample_esn_atoms(gamma: float, mu_tail=None, T: float = 1.0, eps: float = 1e-3, times=None,
                     rng: RngStreamSpec = RngStreamSpec(0)) -> PathSample:
    """ESN path from the atoms of the point process with marks above eps.

    Discarded atoms can only matter when the kept supremum is below
    ``eps + max(-gamma, 0) s``; such grid points are flagged as censored
    in ``meta["censored"]``. The reported value is the kept supremum,
    floored at ``max(-gamma, 0) s`` (the boost the dense small atoms near
    time 0 always provide) and at 0.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu_tail = ReciprocalTail() if mu_tail is None else mu_tail
    times = _grid(T if times is None else times, T)
    gen = rng.generator()
    mass = float(mu_tail.tail(eps))
    n = gen.poisson(T * mass)
    at = T * (1.0 - gen.random(n))
    marks = np.atleast_1d(mu_tail.inverse_tail(mass * (1.0 - gen.random(n))))
    kept = esn_from_atoms(gamma, at, marks, times)
    boost = max(-gamma, 0.0) * times
    censored = kept < eps + boost
    vals = np.maximum(np.maximum(kept, boost), 0.0)
    meta = {"seed": rng.seed, "stream": rng.stream, "eps": eps, "gamma": gamma,
            "censored": censored, "bias_bound": eps + max(-gamma, 0.0) * T}
    return PathSample(times, lnln_from_value(vals), at, lnln_from_value(marks), meta)


# --------------------------------------------------------------------------
# ensembles and export


def sample_ensemble(sampler, n, seed, workers=None, **kwargs):
    """n independent paths from ``sampler``, stream i keyed by (seed, i)."""
    return map_streams(sampler, n, seed, workers=workers, **kwargs)


def ensemble_codes(paths):
    """(n_paths, n_times) array of storage codes."""
    return np.vstack([p.codes for p in paths])


def write_paths_csv(paths, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stream", "time", "value"])
        for p in paths:
            for t, v in zip(p.times, p.values):
                w.writerow([p.meta.get("stream", ""), repr(float(t)), repr(float(v))])


def write_atoms_csv(paths, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stream", "time", "mark"])
        for p in paths:
            for t, v in p.atoms:
                w.writerow([p.meta.get("stream", ""), repr(float(t)), repr(float(v))])
