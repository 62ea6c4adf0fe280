"""Command-line runner: ``cbilab run <config.toml>``, ``cbilab list-presets``, ``cbilab version``.

A config names an experiment and its mechanisms::

    experiment = "verify-subordinator"
    seed = 1
    N = 20000
    t_list = [25, 50, 100, 200]
    s_grid = [1.0]
    output = "out/log"

    [phi]
    preset = "log_immigration"
    params = { c = 1.0 }

Exit status is 0 when every check of the report passes, 2 when one fails
and 1 on any error.
"""

from __future__ import annotations

import argparse
import inspect
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .limitlab.generator import TestFunction, fastjump_check, generator_convergence_table
from .limitlab.tables import ConvergenceTable
from .limitlab.verify import (verify_cbi_esn_limit, verify_prop1_transforms,
                              verify_subordinator_limit)
from .mechanisms import (BRANCHING_PRESETS, IMMIGRATION_PRESETS, BranchingMechanism,
                         ImmigrationMechanism, classify_regime, make_preset, nu_tail, phi_eval,
                         rv_index_probe)
from .sampling import (ReciprocalTail, sample_cb, sample_cbi_shotnoise, sample_ensemble,
                       sample_esn_grid, sample_subordinator, write_paths_csv)

EXPERIMENTS = ("simulate", "verify-subordinator", "verify-cbi-esn", "verify-prop1",
               "generator-table", "fastjump", "mech-probe")


class ConfigError(ValueError):
    pass


def _preset(cfg, key, kind):
    spec = cfg.get(key)
    if spec is None:
        raise ConfigError(f"missing [{key}] section")
    if isinstance(spec, str):
        name, params = spec, {}
    else:
        name, params = spec.get("preset"), dict(spec.get("params", {}))
    table = BRANCHING_PRESETS if kind == "branching" else IMMIGRATION_PRESETS
    if name not in table:
        raise ConfigError(f"unknown mechanism preset: {name!r}")
    try:
        return make_preset(name, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters for preset {name!r}: {exc}") from exc


def _validate(cfg):
    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    t_list = cfg.get("t_list")
    if t_list is not None:
        if len(t_list) == 0 or any(b <= a for a, b in zip(t_list, t_list[1:])):
            raise ConfigError("invalid parameters: t_list must be nonempty and increasing")
    if "N" in cfg and int(cfg["N"]) < 100:
        raise ConfigError("invalid parameters: N must be at least 100")
    return exp


def _simulate(cfg, out):
    process = cfg.get("process", "subordinator")
    seed, n = int(cfg.get("seed", 0)), int(cfg.get("N", 100))
    T = float(cfg.get("T", 1.0))
    grid = cfg.get("grid", [T])
    workers = cfg.get("workers")
    eps = cfg.get("eps")
    if process == "subordinator":
        paths = sample_ensemble(sample_subordinator, n, seed, workers, phi=_preset(cfg, "phi", "i"),
                                T=T, grid=grid, eps=eps)
    elif process == "cb":
        paths = sample_ensemble(sample_cb, n, seed, workers, psi=_preset(cfg, "psi", "branching"),
                                x0=float(cfg.get("x0", 1.0)), T=T, grid=grid)
    elif process == "cbi":
        paths = sample_ensemble(sample_cbi_shotnoise, n, seed, workers,
                                psi=_preset(cfg, "psi", "branching"), phi=_preset(cfg, "phi", "i"),
                                T=T, grid=grid, eps=eps)
    elif process == "esn":
        paths = sample_ensemble(sample_esn_grid, n, seed, workers, gamma=float(cfg.get("gamma", 0.0)),
                                mu_tail=ReciprocalTail(float(cfg.get("c", 1.0))), times=grid)
    else:
        raise ConfigError(f"invalid parameters: unknown process {process!r}")
    # ln(1 + Y) stays finite at 0 and is exp of the storage code
    log1p = np.exp(np.vstack([p.codes for p in paths]))
    rows = []
    for k, t in enumerate(paths[0].times):
        col = log1p[:, k]
        rows.append({"t": float(t), "n": n, "median_log1p_value": float(np.median(col)),
                     "q10_log1p_value": float(np.quantile(col, 0.1)),
                     "q90_log1p_value": float(np.quantile(col, 0.9)), "discrepancy": 0.0})
    table = ConvergenceTable("simulate", {"process": process, "seed": seed, "N": n, "T": T}, rows)
    if cfg.get("write_samples", True):
        write_paths_csv(paths, os.path.join(out, "samples.csv"))
    return table


def _mech_probe(cfg):
    rows = []
    if "phi" in cfg:
        phi = _preset(cfg, "phi", "immigration")
        for q in cfg.get("q_grid", [1e-8, 1e-6, 1e-4, 1e-2, 1.0]):
            u = 1.0 / q
            val = phi_eval(phi, q)
            rows.append({"t": float(u), "q": float(q), "phi": val, "nu_tail": float(nu_tail(phi, u)),
                         "ratio": float(nu_tail(phi, u)) / val,
                         "discrepancy": abs(float(nu_tail(phi, u)) / val - 1.0)})
        params = {"phi": phi.name, "phi_params": phi.params, "regime": phi.regime}
        checks = {}
        if phi.equivalent is not None and phi.rv_index == 0.0:
            cls, pr = classify_regime(phi)
            params.update(probe_class=cls, probe_index=pr.index, probe_level=pr.level)
            checks["classification_consistent"] = phi.regime.startswith(cls)
        else:
            pr = rv_index_probe(lambda x: phi_eval(phi, x), at="zero")
            params.update(probe_index=pr.index, declared_index=phi.rv_index)
            checks["index_consistent"] = abs(pr.index - phi.rv_index) <= 0.05
    else:
        psi = _preset(cfg, "psi", "branching")
        from .mechanisms import psi_eval
        for q in cfg.get("q_grid", [1e-2, 1e-1, 1.0, 10.0]):
            rows.append({"t": float(q), "q": float(q), "psi": psi_eval(psi, q), "discrepancy": 0.0})
        params = {"psi": psi.name, "psi_params": psi.params}
        checks = {}
    table = ConvergenceTable("mech-probe", params, rows)
    table.checks.update(checks)
    return table


def execute(cfg, out):
    exp = _validate(cfg)
    seed = int(cfg.get("seed", 0))
    workers = cfg.get("workers")
    if exp == "simulate":
        return _simulate(cfg, out)
    if exp == "verify-subordinator":
        jp = cfg.get("joint_pair", [0.5, 1.0])
        return verify_subordinator_limit(
            _preset(cfg, "phi", "immigration"), s_grid=tuple(cfg.get("s_grid", [1.0])),
            t_list=tuple(cfg.get("t_list", [25, 50, 100, 200])), n=int(cfg.get("N", 20000)),
            level=float(cfg.get("level", 0.01)), seed=seed, workers=workers, eps=cfg.get("eps"),
            joint_pair=tuple(jp) if jp else None, ks_threshold=cfg.get("ks_threshold"))
    if exp == "verify-cbi-esn":
        return verify_cbi_esn_limit(
            _preset(cfg, "psi", "branching"), _preset(cfg, "phi", "immigration"),
            s_grid=tuple(cfg.get("s_grid", [1.0])), t_list=tuple(cfg.get("t_list", [200])),
            n=int(cfg.get("N", 20000)), level=float(cfg.get("level", 0.01)), seed=seed,
            workers=workers, eps=cfg.get("eps"), ks_threshold=cfg.get("ks_threshold"),
            esn_compare=bool(cfg.get("esn_compare", False)))
    if exp == "verify-prop1":
        return verify_prop1_transforms(
            float(cfg.get("alpha", 1.0)), float(cfg.get("beta", 1.0)), float(cfg.get("d", 1.0)),
            float(cfg.get("dprime", 1.0)), float(cfg.get("s", 1.0)), cfg.get("lambda_grid"),
            tuple(cfg.get("t_list", [1e2, 1e3, 1e4])), cfg.get("prelimit", "auto"),
            float(cfg.get("tol", 0.01)))
    if exp == "generator-table":
        f = TestFunction(*cfg.get("f", [0.5, 1.0, 2.0, 3.0]))
        return generator_convergence_table(
            _preset(cfg, "psi", "branching"), _preset(cfg, "phi", "immigration"), f,
            cfg.get("x_grid"), tuple(cfg.get("t_list", [10, 100, 1000])))
    if exp == "fastjump":
        return fastjump_check(_preset(cfg, "phi", "immigration"), float(cfg.get("x", 1.0)),
                              float(cfg.get("v", 2.0)), tuple(cfg.get("t_list", [1e2, 1e3, 1e4])))
    return _mech_probe(cfg)


def cmd_run(path):
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        print(f"error: cannot read config {path}: {exc}", file=sys.stderr)
        return 1
    out = cfg.get("output", "cbilab-out")
    if not os.path.isabs(out):
        out = os.path.join(os.path.dirname(os.path.abspath(path)), out)
    try:
        os.makedirs(out, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(out)
    except OSError as exc:
        print(f"error: cannot write output directory {out}: {exc}", file=sys.stderr)
        return 1
    try:
        table = execute(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # execution error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    table.to_json(os.path.join(out, "report.json"))
    table.to_csv(os.path.join(out, "table.csv"))
    for line in table.summary_lines():
        print(line)
    print(f"verdict: {table.verdict}")
    return 0 if table.verdict == "pass" else 2


def _defaults(fn):
    return ", ".join(f"{k}={v.default}" for k, v in inspect.signature(fn).parameters.items())


def preset_catalogue():
    rows = []
    for name, fn in BRANCHING_PRESETS.items():
        rows.append((name, "branching", _defaults(fn), "-", "-"))
    for name, fn in IMMIGRATION_PRESETS.items():
        m = fn()
        rows.append((name, "immigration", _defaults(fn), m.regime, "yes" if m.log_moment else "no"))
    return rows


def cmd_list_presets():
    rows = preset_catalogue()
    head = ("name", "kind", "parameters", "regime", "log moment")
    widths = [max(len(str(r[i])) for r in rows + [head]) for i in range(5)]
    for r in [head] + rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip())
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="cbilab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    sub.add_parser("list-presets", help="print the mechanism preset catalogue")
    sub.add_parser("version", help="print the version")
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "list-presets":
        return cmd_list_presets()
    print(f"cbilab {__version__}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
