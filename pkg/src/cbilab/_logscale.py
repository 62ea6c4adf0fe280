"""Overflow-free storage for astronomically large nonnegative values.

Population sizes in the Log and Super-log regimes reach ``exp(exp(200))``
at desk-scale horizons, so paths are stored as ``z = log(log1p(y))``.
Zero maps to ``-inf``. Below ``Z_BIG`` the usual ``log(y)`` is recoverable
in float64; above it, additive corrections are below float resolution of
``z`` and are dropped.
"""

import numpy as np

Z_BIG = 700.0


def lnln_from_logy(logy):
    with np.errstate(divide="ignore"):
        return np.log(np.logaddexp(0.0, logy))


def lnln_from_value(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.log1p(y))


def logy_from_lnln(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        L = np.exp(z)
        big = L > 30.0
        out = np.where(big, L + np.log1p(-np.exp(-np.where(big, L, 30.0))),
                       np.log(np.expm1(np.where(big, 1.0, L))))
    return out[()] if out.ndim == 0 else out


def value_from_lnln(z):
    """``y`` itself; ``inf`` once it leaves float64 range."""
    with np.errstate(over="ignore"):
        return np.expm1(np.exp(np.asarray(z, dtype=float)))


def lnln_sum(z):
    """lnln of the sum of the values whose lnln codes are ``z`` (1-D)."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return -np.inf
    zmax = z.max()
    if zmax > Z_BIG:
        return float(zmax)
    ly = logy_from_lnln(z)
    with np.errstate(divide="ignore"):
        tot = np.logaddexp.reduce(ly)
    return float(lnln_from_logy(tot))


def lnln_scale(z, log_factor):
    """lnln code of ``y * exp(log_factor)``."""
    z = np.asarray(z, dtype=float)
    log_factor = np.broadcast_to(np.asarray(log_factor, dtype=float), z.shape)
    big = z > Z_BIG
    out = np.empty_like(z)
    with np.errstate(over="ignore", invalid="ignore"):
        out[big] = z[big] + np.log1p(log_factor[big] * np.exp(-z[big]))
    small = ~big
    out[small] = lnln_from_logy(logy_from_lnln(z[small]) + log_factor[small])
    return out
