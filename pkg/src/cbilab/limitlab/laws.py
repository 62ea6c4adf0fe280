"""Exact limit laws: extremal-process f.d.d. and ESN marginals."""

import numpy as np


def fdd_extremal_cdf(s_times, ys):
    """P(X_{s_1} <= y_1, ..., X_{s_n} <= y_n) for the extremal process with F(y) = exp(-1/y).

    Equals prod_i F(y'_i)^(s_i - s_{i-1}) with y'_i = min(y_i, ..., y_n)
    and s_0 = 0.
    """
    s = np.asarray(s_times, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if s.size != y.size or s.size == 0:
        raise ValueError("s_times and ys must have the same nonzero length")
    if np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise ValueError("s_times must be positive and strictly increasing")
    if np.any(y <= 0):
        return 0.0
    ymin = np.minimum.accumulate(y[::-1])[::-1]
    ds = np.diff(np.concatenate([[0.0], s]))
    return float(np.exp(-np.sum(ds / ymin)))


def esn_marginal_cdf(gamma, s, y, c=1.0):
    """P(M_s <= y) for the ESN with slope gamma and intensity tail c/x.

    exp(-int_0^s c/(y + gamma v) dv): (1 + gamma s/y)^(-c/gamma), or
    exp(-c s/y) when gamma = 0. Zero where y + gamma v <= 0 somewhere on
    [0, s] (for gamma < 0 the process never drops below |gamma| s).
    """
    if s <= 0:
        raise ValueError("s must be positive")
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # exponent c s/y * log1p(r)/r with r = gamma s/y, stable as gamma -> 0
        r = gamma * s / y
        small = np.abs(r) < 1e-8
        ratio = np.where(small, 1.0 - 0.5 * r, np.log1p(r) / np.where(small, 1.0, r))
        out = np.exp(-c * s / y * ratio)
    low = y <= max(-gamma * s, 0.0)
    out = np.where(low, 0.0, out)
    return out[()] if out.ndim == 0 else out
