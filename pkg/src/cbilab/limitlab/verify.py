"""Verification pipelines: Monte Carlo limit laws and transform-level convergence."""

from __future__ import annotations

import math

import numpy as np

from ..cumulant import laplace_cbi, limit_laplace_prop1
from ..mechanisms import (exp_immigration, phi_inverse, rational_branching, stable_branching,
                          stable_immigration)
from ..renormalize import RenormMap, apply_to_ensemble
from ..sampling import (ReciprocalTail, sample_cbi_shotnoise, sample_ensemble,
                        sample_esn_atoms, sample_esn_grid, sample_subordinator)
from .ks import ks_one_sample, ks_two_sample
from .laws import esn_marginal_cdf, fdd_extremal_cdf
from .tables import ConvergenceTable

#: KS units added to critical values for the epsilon-truncation bias
TRUNCATION_BUDGET = 0.005


def joint_cells(pairs, s1, s2, probs=(0.25, 0.5, 0.75)):
    """Empirical vs exact joint CDF on a 3x3 grid of limit-marginal quantiles.

    Returns rows (y1, y2, empirical, exact, z) with z the deviation in
    binomial standard errors.
    """
    n = pairs.shape[0]
    y1s = [-s1 / math.log(p) for p in probs]
    y2s = [-s2 / math.log(p) for p in probs]
    cells = []
    for y1 in y1s:
        for y2 in y2s:
            exact = fdd_extremal_cdf([s1, s2], [y1, y2])
            emp = float(np.mean((pairs[:, 0] <= y1) & (pairs[:, 1] <= y2)))
            se = math.sqrt(exact * (1 - exact) / n)
            cells.append({"y1": y1, "y2": y2, "empirical": emp, "exact": exact,
                          "z": abs(emp - exact) / se})
    return cells


def verify_subordinator_limit(phi, s_grid=(1.0,), t_list=(25, 50, 100, 200), n=20000,
                              level=0.01, seed=0, workers=None, eps=None,
                              joint_pair=(0.5, 1.0), ks_threshold=None, z_max=3.0):
    """g-renormalised subordinator against the extremal process F(y) = exp(-1/y).

    Rows hold the one-sample KS statistic per s (``discrepancy`` is the
    largest), and the largest joint-cell z-score for the two times in
    ``joint_pair``. Checks: final KS below threshold, monotone trend,
    joint cells within ``z_max`` standard errors at the largest t.
    """
    if phi.equivalent is None or phi.rv_index != 0.0:
        table = ConvergenceTable("verify-subordinator", {"phi": phi.name}, [])
        table.checks["applicable"] = False
        return table
    s_all = sorted(set(s_grid) | (set(joint_pair) if joint_pair else set()))
    rows = []
    last_cells = []
    for t in t_list:
        grid = [s * t for s in s_all]
        paths = sample_ensemble(sample_subordinator, n, seed + int(t), workers=workers, phi=phi,
                                T=max(grid), grid=grid, eps=eps, keep_atoms=False)
        rs = apply_to_ensemble(RenormMap("nonlinear_g", t, phi), paths, s_all)
        row = {"t": float(t), "n": n}
        ks_vals = []
        for s in s_grid:
            # marginal of the extremal process at s: F(y)^s
            rep = ks_one_sample(rs.marginal(s), lambda y, s=s: np.exp(-s / y), level)
            row[f"ks_s{s:g}"] = rep.statistic
            ks_vals.append(rep.statistic)
            row["critical"] = rep.critical
        row["discrepancy"] = max(ks_vals)
        if joint_pair:
            last_cells = joint_cells(rs.joint(*joint_pair), *joint_pair)
            row["joint_max_z"] = max(c["z"] for c in last_cells)
        rows.append(row)
    threshold = ks_threshold if ks_threshold is not None else rows[-1]["critical"] + TRUNCATION_BUDGET
    table = ConvergenceTable("verify-subordinator",
                             {"phi": phi.name, "phi_params": phi.params, "s_grid": list(s_grid),
                              "t_list": list(t_list), "n": n, "level": level, "seed": seed,
                              "ks_threshold": threshold}, rows)
    table.checks["final_ks_below_threshold"] = rows[-1]["discrepancy"] < threshold
    table.checks["monotone_trend"] = table.monotone_trend
    if joint_pair:
        table.checks["joint_cells_within_se"] = rows[-1]["joint_max_z"] <= z_max
        table.params["joint_cells"] = last_cells
    return table


def cbi_limit_target(psi, phi):
    """(value scale, ESN slope, intensity constant) of the rescaled limit c M.

    Log case: c g_t(Y) converges to the ESN with slope b and intensity c/x.
    Super-log case: g_t(Y) converges to the extremal process (slope 0).
    """
    if phi.regime == "Log":
        c = phi.log_limit
        return c, psi.b, c
    return 1.0, 0.0, 1.0


def verify_cbi_esn_limit(psi, phi, s_grid=(1.0,), t_list=(200,), n=20000, level=0.01, seed=0,
                         workers=None, eps=None, ks_threshold=None, esn_compare=False):
    """Shot-noise CBI, g-renormalised, against the exact ESN marginal."""
    scale, gamma, c = cbi_limit_target(psi, phi)
    rows = []
    for t in t_list:
        grid = [s * t for s in s_grid]
        paths = sample_ensemble(sample_cbi_shotnoise, n, seed + int(t), workers=workers, psi=psi,
                                phi=phi, T=max(grid), grid=grid, eps=eps, keep_atoms=False)
        rs = apply_to_ensemble(RenormMap("nonlinear_g", t, phi), paths, s_grid)
        row = {"t": float(t), "n": n}
        ks_vals = []
        for s in s_grid:
            rep = ks_one_sample(scale * rs.marginal(s),
                                lambda y, s=s: esn_marginal_cdf(gamma, s, y, c), level)
            row[f"ks_s{s:g}"] = rep.statistic
            row["critical"] = rep.critical
            ks_vals.append(rep.statistic)
            if esn_compare:
                esn = sample_ensemble(sample_esn_grid, n, seed + 7919 + int(t), workers=workers,
                                      gamma=gamma, mu_tail=ReciprocalTail(c), times=list(s_grid))
                ref = np.array([p.values[list(s_grid).index(s)] for p in esn])
                row[f"ks2_s{s:g}"] = ks_two_sample(scale * rs.marginal(s), ref, level).statistic
        row["discrepancy"] = max(ks_vals)
        rows.append(row)
    threshold = ks_threshold if ks_threshold is not None else rows[-1]["critical"] + TRUNCATION_BUDGET
    table = ConvergenceTable("verify-cbi-esn",
                             {"psi": psi.name, "psi_b": psi.b, "psi_sigma2": psi.sigma2,
                              "phi": phi.name, "phi_params": phi.params, "slope": gamma,
                              "intensity": c, "value_scale": scale, "s_grid": list(s_grid),
                              "t_list": list(t_list), "n": n, "seed": seed,
                              "ks_threshold": threshold}, rows)
    table.checks["final_ks_below_threshold"] = rows[-1]["discrepancy"] < threshold
    table.checks["monotone_trend"] = table.monotone_trend
    return table


def prop1_prelimit(alpha, beta, d, dprime, kind="auto"):
    """Prelimit mechanisms for the linear-scaling check.

    ``exact`` takes Psi = d x^(1+alpha), Phi = d' x^beta themselves, for
    which the rescaling is exact up to the branching term. ``rational``
    (alpha = beta = 1 only) takes Psi = d x^2/(1+x), Phi = d' x/(1+x),
    equivalent to those at 0 but not self-similar, so the convergence is
    a genuine limit. ``auto`` picks rational when it applies.
    """
    if kind == "auto":
        kind = "rational" if alpha == 1 and beta == 1 and d > 0 else "exact"
    if kind == "rational":
        if not (alpha == 1 and beta == 1):
            raise ValueError("rational prelimit needs alpha = beta = 1")
        return rational_branching(d), exp_immigration(dprime, 1.0), kind
    return stable_branching(d, alpha), stable_immigration(dprime, beta), kind


def verify_prop1_transforms(alpha=1.0, beta=1.0, d=1.0, dprime=1.0, s=1.0, lambda_grid=None,
                            t_list=(1e2, 1e3, 1e4), prelimit="auto", tol=0.01):
    """sup over lambda of |E exp(-lam c(t) Y_{st}) - limit|, per t, with c(t) = Phi^{-1}(1/t)."""
    lambda_grid = np.logspace(-1, 1, 10) if lambda_grid is None else np.asarray(lambda_grid)
    psi, phi, kind = prop1_prelimit(alpha, beta, d, dprime, prelimit)
    limit = np.array([limit_laplace_prop1(alpha, beta, d, dprime, s, lam) for lam in lambda_grid])
    rows = []
    for t in t_list:
        ct = phi_inverse(phi, 1.0 / t)
        pre = np.array([laplace_cbi(psi, phi, 0.0, s * t, lam * ct) for lam in lambda_grid])
        rows.append({"t": float(t), "scale": ct, "discrepancy": float(np.max(np.abs(pre - limit)))})
    table = ConvergenceTable("verify-prop1",
                             {"alpha": alpha, "beta": beta, "d": d, "dprime": dprime, "s": s,
                              "prelimit": kind, "lambda_grid": lambda_grid.tolist(),
                              "t_list": [float(t) for t in t_list], "tol": tol}, rows)
    table.checks["final_below_tol"] = rows[-1]["discrepancy"] < tol
    if kind != "exact":
        table.checks["decreasing"] = table.strictly_decreasing
    return table


def esn_crossvalidate(gamma, s=1.0, n=20000, level=0.01, seed=0, eps=1e-3, workers=None, c=1.0):
    """Two-sample KS between the grid and the atom ESN samplers at time s."""
    mu = ReciprocalTail(c)
    a = sample_ensemble(sample_esn_grid, n, seed, workers=workers, gamma=gamma, mu_tail=mu, times=[s])
    b = sample_ensemble(sample_esn_atoms, n, seed + 1, workers=workers, gamma=gamma, mu_tail=mu,
                        T=s, eps=eps, times=[s])
    va = np.array([p.values[-1] for p in a])
    vb = np.array([p.values[-1] for p in b])
    return ks_two_sample(va, vb, level)
