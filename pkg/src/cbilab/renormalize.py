"""Space-time renormalisations of path ensembles.

Three value maps, each applied to Y at time s*t:

* ``linear``: y -> Phi^{-1}(1/t) y
* ``nonlinear_g``: y -> g_t(y) = 1 / (t F(1/y)) for an increasing F
  equivalent to Phi at 0 (the preset's closed form)
* ``log_case``: y -> ln(1 + y) / (c t)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._logscale import logy_from_lnln, value_from_lnln
from .mechanisms import ImmigrationMechanism, phi_inverse


class CoverageError(ValueError):
    """A path does not reach the requested renormalised time."""


def g_map(F, t, y):
    """1 / (t F(1/y)), with g(0) = 0 and the convention 1/inf = 0."""
    if t <= 0:
        raise ValueError("t must be positive")
    if isinstance(F, ImmigrationMechanism):
        F = F.equivalent
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = 1.0 / (t * np.asarray(F(1.0 / y), dtype=float))
    out = np.where(y == 0, 0.0, out)
    return out[()] if out.ndim == 0 else out


def linear_scale(phi, t):
    """Phi^{-1}(1/t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    return phi_inverse(phi, 1.0 / t)


def linear_map(phi, t, y):
    """Phi^{-1}(1/t) y."""
    return linear_scale(phi, t) * np.asarray(y, dtype=float)


@dataclass
class RenormMap:
    """A value map y -> map_t(y) for fixed t.

    Parameters
    ----------
    kind : {"linear", "nonlinear_g", "log_case", "identity"}
    t : scale parameter
    mech : immigration mechanism (linear, nonlinear_g)
    c : constant of the log-case map
    F : optional increasing function overriding the preset closed form
    """

    kind: str
    t: float
    mech: ImmigrationMechanism | None = None
    c: float = 1.0
    F: object = None

    def __post_init__(self):
        if self.kind not in ("linear", "nonlinear_g", "log_case", "identity"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        if self.t <= 0:
            raise ValueError("t must be positive")
        self._scale = linear_scale(self.mech, self.t) if self.kind == "linear" else None

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            return y
        if self.kind == "linear":
            return self._scale * y
        if self.kind == "log_case":
            return np.log1p(y) / (self.c * self.t)
        return g_map(self.F if self.F is not None else self.mech, self.t, y)

    def from_codes(self, z):
        """The map applied to values given as storage codes log(log1p(y))."""
        z = np.asarray(z, dtype=float)
        if self.kind == "identity":
            return value_from_lnln(z)
        if self.kind == "log_case":
            return np.exp(z) / (self.c * self.t)
        if self.kind == "linear":
            with np.errstate(over="ignore"):
                return np.exp(logy_from_lnln(z) + math.log(self._scale))
        if self.F is None and hasattr(self.mech.equivalent, "recip_H_lnln"):
            return np.asarray(self.mech.equivalent.recip_H_lnln(z)) / self.t
        return self(value_from_lnln(z))


def grid_index(times, s_times):
    """Index of the largest grid time <= each requested time."""
    times = np.asarray(times, dtype=float)
    s_times = np.asarray(s_times, dtype=float)
    idx = np.searchsorted(times, s_times * (1 + 1e-12), side="right") - 1
    if np.any(idx < 0) or np.any(s_times > times[-1] * (1 + 1e-12)):
        raise CoverageError("path grid does not cover the requested times")
    return idx


@dataclass
class RenormalizedSample:
    s_grid: np.ndarray
    streams: np.ndarray
    values: np.ndarray        # (n_paths, n_s)

    def marginal(self, s):
        k = int(np.flatnonzero(np.isclose(self.s_grid, s))[0])
        return self.values[:, k]

    def joint(self, s1, s2):
        return np.column_stack([self.marginal(s1), self.marginal(s2)])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "stream", "value"])
            for k, s in enumerate(self.s_grid):
                for st, v in zip(self.streams, self.values[:, k]):
                    w.writerow([repr(float(s)), int(st), repr(float(v))])


def apply_to_ensemble(rmap: RenormMap, paths, s_grid=(0.25, 0.5, 1.0, 2.0)) -> RenormalizedSample:
    """Evaluate each path at times s*t and apply the value map."""
    s_grid = np.asarray(s_grid, dtype=float)
    out = np.empty((len(paths), s_grid.size))
    streams = np.empty(len(paths), dtype=np.int64)
    for i, p in enumerate(paths):
        idx = grid_index(p.times, s_grid * rmap.t)
        out[i] = rmap.from_codes(p.codes[idx])
        streams[i] = p.meta.get("stream", i)
    return RenormalizedSample(s_grid, streams, out)
