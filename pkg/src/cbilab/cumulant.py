"""Cumulant flow dv/dt = -Psi(v), v_0 = lam, and exact CBI Laplace transforms.

    E_x[exp(-lam Y_t)] = exp(-x v_t(lam) - int_0^t Phi(v_s(lam)) ds)

Closed-form flows are used for the zero, linear, Feller, stable and
rational branching families; everything else goes through an embedded
Runge-Kutta solver (DOP853) on ln v, with the time integral of Phi carried
as an extra state component so it shares the adaptive mesh.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .mechanisms import BranchingMechanism, ImmigrationMechanism, phi_eval, psi_eval

#: horizon limit for mechanisms without a closed-form flow
GENERIC_HORIZON = 1e4


class SolverError(RuntimeError):
    """The cumulant ODE solver failed; ``diagnostics`` holds the solver message."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


def _flow_kind(psi):
    if psi.is_zero or psi.family == "zero":
        return "zero"
    if psi.family in ("linear", "feller") or (psi.family == "custom" and not psi.has_jumps):
        return "quadratic"
    if psi.family in ("stable", "rational"):
        return psi.family
    return None


def _rational_flow(d, lam, t):
    # w = 1/v solves w + ln w = 1/lam - ln lam + d t
    rhs = 1.0 / lam - math.log(lam) + d * t
    # start from the dominant balance
    w = rhs - math.log(rhs) if rhs > 1.5 else math.exp(rhs - 1.0)
    w = max(w, 1e-300)
    for _ in range(100):
        step = (w + math.log(w) - rhs) / (1.0 + 1.0 / w)
        w_new = w - step
        if w_new <= 0:
            w_new = 0.5 * w
        if abs(w_new - w) <= 1e-16 * w:
            w = w_new
            break
        w = w_new
    return 1.0 / w


def closed_flow(psi, lam, t):
    """v_t(lam) from a closed form, or None when the family has none."""
    kind = _flow_kind(psi)
    if kind is None:
        return None
    if lam == 0 or t == 0 or kind == "zero":
        return float(lam)
    if kind == "quadratic":
        b, s2 = psi.b, psi.sigma2
        if s2 == 0:
            return lam * math.exp(-b * t)
        if b == 0:
            return lam / (1.0 + 0.5 * s2 * lam * t)
        # lam e^{-bt} / (1 + (s2 lam / 2b)(1 - e^{-bt}))
        return lam * math.exp(-b * t) / (1.0 - 0.5 * s2 * lam * math.expm1(-b * t) / b)
    if kind == "stable":
        d, a = psi.params["d"], psi.params["alpha"]
        return (lam**-a + a * d * t) ** (-1.0 / a)
    return _rational_flow(psi.params["d"], lam, t)


def _rhs(psi, phi):
    def f(s, y):
        v = math.exp(y[0])
        out = [-psi_eval(psi, v) / v]
        if phi is not None:
            out.append(phi_eval(phi, v))
        return out
    return f


def _numeric(psi, phi, lam, t, tol, dense=False):
    if t > GENERIC_HORIZON:
        raise SolverError(f"horizon {t} exceeds the generic solver cap {GENERIC_HORIZON}",
                          {"horizon": t})
    y0 = [math.log(lam)] + ([0.0] if phi is not None else [])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = integrate.solve_ivp(_rhs(psi, phi), (0.0, t), y0, method="DOP853",
                                  rtol=max(tol, 1e-13), atol=max(tol, 1e-300),
                                  dense_output=dense)
    if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
        raise SolverError(f"cumulant solver failed: {sol.message}",
                          {"nfev": sol.nfev, "t_reached": float(sol.t[-1])})
    return sol


def solve_v(psi: BranchingMechanism, lam: float, t: float, tol: float = 1e-10,
            method: str = "auto") -> float:
    """v_t(lam), the solution of dv/dt = -Psi(v) started at lam.

    Parameters
    ----------
    method : {"auto", "closed", "numeric"}
        ``auto`` takes the closed-form flow when the family has one.
    """
    if lam < 0 or t < 0:
        raise ValueError("lam and t must be nonnegative")
    if t == 0 or lam == 0:
        return float(lam)
    if method in ("auto", "closed"):
        v = closed_flow(psi, lam, t)
        if v is not None:
            return float(v)
        if method == "closed":
            raise ValueError("no closed-form flow for this mechanism")
    sol = _numeric(psi, None, lam, t, tol)
    return float(math.exp(sol.y[0, -1]))


def _closed_phi_integral(psi, phi, lam, t):
    kind = _flow_kind(psi)
    if phi.family == "zero" or (phi.beta == 0 and phi.jump_measure.total_mass == 0):
        return 0.0
    if kind == "zero":
        return t * phi_eval(phi, lam)
    if kind == "stable" and phi.family == "stable":
        d, a = psi.params["d"], psi.params["alpha"]
        dp, be = phi.params["dprime"], phi.params["beta"]
        r = be / a
        if r == 1.0:
            return dp / (a * d) * math.log1p(a * d * lam**a * t)
        x0 = lam**-a
        return dp / (a * d) * ((x0 + a * d * t) ** (1 - r) - x0 ** (1 - r)) / (1 - r)
    if kind == "rational" and phi.family == "exponential" and phi.params["rate"] == 1.0:
        # Phi / Psi = mass / (d v), so the integral is a log ratio
        v_t = closed_flow(psi, lam, t)
        return phi.params["mass"] / psi.params["d"] * math.log(lam / v_t)
    if kind == "quadratic" and psi.sigma2 == 0 and psi.b != 0 and phi.family == "stable":
        b, dp, be = psi.b, phi.params["dprime"], phi.params["beta"]
        return -dp * lam**be * math.expm1(-b * be * t) / (b * be)
    return None


def _time_panels(t):
    edges = [0.0] + [x for x in 10.0 ** np.arange(-6, 13) if x < t] + [t]
    return list(zip(edges[:-1], edges[1:]))


def phi_integral(psi, phi, lam, t, tol=1e-10, method="auto"):
    """int_0^t Phi(v_s(lam)) ds."""
    if t == 0 or lam == 0:
        return 0.0
    if method == "auto":
        val = _closed_phi_integral(psi, phi, lam, t)
        if val is not None:
            return val
    if method in ("auto", "closed") and _flow_kind(psi) is not None:
        g = lambda s: phi_eval(phi, closed_flow(psi, lam, s))
        total = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for a, b in _time_panels(t):
                total += integrate.quad(g, a, b, epsabs=0.0, epsrel=1e-11, limit=200)[0]
        return total
    sol = _numeric(psi, phi, lam, t, tol)
    return float(sol.y[1, -1])


def laplace_cbi(psi: BranchingMechanism, phi: ImmigrationMechanism, x0: float, t: float,
                lam: float, tol: float = 1e-8, method: str = "auto") -> float:
    """E_{x0}[exp(-lam Y_t)] for the CBI(Psi, Phi) process."""
    if min(x0, t, lam) < 0:
        raise ValueError("x0, t and lam must be nonnegative")
    if lam == 0:
        return 1.0
    if t == 0:
        return math.exp(-lam * x0)
    v = solve_v(psi, lam, t, tol=min(tol, 1e-10), method=method)
    return math.exp(-x0 * v - phi_integral(psi, phi, lam, t, tol=min(tol, 1e-10), method=method))


def limit_laplace_prop1(alpha, beta, d, dprime, s, lam):
    """Laplace transform at time s of the linear-scaling limit, started from 0.

    The limit is CBI(Psi_bar, Phi_bar) with Psi_bar = (d/d') x^(1+alpha),
    Phi_bar = x^alpha when beta = alpha, and the stable subordinator
    Phi_bar = x^beta with Psi_bar = 0 when beta < alpha.
    """
    if not (0 < beta <= alpha <= 1) or d < 0 or dprime <= 0:
        raise ValueError("need 0 < beta <= alpha <= 1, d >= 0, d' > 0")
    from .mechanisms import stable_branching, stable_immigration, zero_branching
    if lam == 0:
        return 1.0
    if beta < alpha or d == 0:
        return math.exp(-s * lam**beta)
    psi = stable_branching(d / dprime, alpha)
    phi = stable_immigration(1.0, alpha)
    return laplace_cbi(psi, phi, 0.0, s, lam)


@dataclass
class CumulantSolution:
    """v_t(lam) on a time grid, with solver statistics."""

    psi: BranchingMechanism
    lam: float
    horizon: float
    times: np.ndarray
    values: np.ndarray
    solver_stats: dict = field(default_factory=dict)

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


def solve_cumulant(psi, lam, horizon, n_grid=101, tol=1e-10, method="auto"):
    """Tabulate v_t(lam) for t on a uniform grid of [0, horizon]."""
    times = np.linspace(0.0, horizon, n_grid)
    if lam > 0 and method != "numeric" and _flow_kind(psi) is not None:
        vals = np.array([closed_flow(psi, lam, t) for t in times])
        stats = {"method": "closed", "nfev": 0, "max_error": 0.0}
    elif lam == 0:
        vals = np.zeros_like(times)
        stats = {"method": "trivial", "nfev": 0, "max_error": 0.0}
    else:
        sol = _numeric(psi, None, lam, horizon, tol, dense=True)
        vals = np.exp(sol.sol(times)[0])
        vals[0] = lam
        stats = {"method": "DOP853", "nfev": int(sol.nfev), "steps": len(sol.t) - 1,
                 "max_error": tol}
    return CumulantSolution(psi, float(lam), float(horizon), times, vals, stats)
