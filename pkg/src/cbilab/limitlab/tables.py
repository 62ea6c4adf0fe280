"""Convergence tables and their JSON/CSV serialisation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


def _clean(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


@dataclass
class ConvergenceTable:
    """Rows ordered by t, each with at least ``t`` and ``discrepancy``."""

    experiment: str
    params: dict
    rows: list
    checks: dict = field(default_factory=dict)   # named boolean criteria

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r["t"])

    @property
    def discrepancies(self):
        return np.array([r["discrepancy"] for r in self.rows], dtype=float)

    @property
    def monotone_trend(self):
        """Nonincreasing in t up to one inversion."""
        d = self.discrepancies
        return int(np.sum(np.diff(d) > 0)) <= 1

    @property
    def strictly_decreasing(self):
        return bool(np.all(np.diff(self.discrepancies) < 0))

    @property
    def verdict(self):
        return "pass" if all(self.checks.values()) else "fail"

    def to_dict(self):
        return _clean({"experiment": self.experiment, "params": self.params,
                       "rows": self.rows, "checks": self.checks,
                       "monotone_trend": self.monotone_trend, "verdict": self.verdict})

    def to_json(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")

    def columns(self):
        cols = []
        for r in self.rows:
            for k, v in r.items():
                if k not in cols and not isinstance(v, (list, dict, np.ndarray)):
                    cols.append(k)
        return cols

    def to_csv(self, path):
        cols = self.columns()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_fmt(r.get(c, "")) for c in cols])

    def summary_lines(self):
        cols = self.columns()
        return ["  ".join(f"{c}={_fmt(r.get(c, ''))}" for c in cols) for r in self.rows]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(_clean(v))
