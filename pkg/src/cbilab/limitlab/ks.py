"""Kolmogorov-Smirnov statistics with asymptotic critical values."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import special


@dataclass
class KsReport:
    statistic: float
    n: int
    critical: float
    level: float
    verdict: str          # "accept" or "reject"
    kind: str             # "one-sample" or "two-sample"
    m: int = 0

    @property
    def accepted(self):
        return self.verdict == "accept"

    def to_dict(self):
        return asdict(self)


def kolmogorov_quantile(level):
    """c(level) with P(K > c) = level for the Kolmogorov distribution."""
    return float(special.kolmogi(level))


def ks_one_sample(samples, cdf, level=0.01) -> KsReport:
    """sup_y |F_n(y) - cdf(y)| against a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    # with ties the upper step is taken at the last copy, the lower at the first
    last = np.searchsorted(x, x, side="right")
    first = np.searchsorted(x, x, side="left")
    d_plus = np.max(last / n - F)
    d_minus = np.max(F - first / n)
    stat = float(max(d_plus, d_minus, 0.0))
    crit = kolmogorov_quantile(level) / np.sqrt(n)
    return KsReport(stat, n, float(crit), level, "accept" if stat <= crit else "reject",
                    "one-sample")


def ks_two_sample(a, b, level=0.01) -> KsReport:
    """sup_y |F_a(y) - F_b(y)| over the pooled sample."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / n
    fb = np.searchsorted(b, pooled, side="right") / m
    stat = float(np.max(np.abs(fa - fb)))
    crit = kolmogorov_quantile(level) * np.sqrt((n + m) / (n * m))
    return KsReport(stat, n, float(crit), level, "accept" if stat <= crit else "reject",
                    "two-sample", m)
