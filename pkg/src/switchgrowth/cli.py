"""Command-line interface: validate | analytic | solve | simulate | compare.

Usage:
    switchgrowth <subcommand> --config path/to/config.json [--out-dir DIR]

The configuration is a single JSON document (schema below); outputs are
deterministic JSON/CSV files in the output directory.  Exit codes:
0 success, 1 domain or validation failure, 2 config parse failure,
3 solver non-convergence, 4 comparison tolerance failure.

Config schema (unknown keys are rejected)::

    {
      "spec_version": 1,
      "problem": {
        "regimes": [{"A": 0.2, "x": 0.0}, {"A": 0.3, "x": 1.0}],
        "gamma": 2.0, "rho": 0.04, "delta": 0.05, "pi": 0.0,
        "eta": "vanishing"            # or a number, or an IxI matrix
      },
      "grid":   {"k_min": 0.01, "k_max": 6.0, "n": 4001},
      "solver": {"tol": 1e-8, "max_iter": 10000,
                 "consumption_mode": "closed-form", "n_c": 101,
                 "damping": 1.0},
      "sim":    {"dt": 1e-3, "t_max": 90.0, "k0": 0.5, "i0": 1,
                 "event_tol": 1e-10, "tail_handling": "analytic-tail",
                 "policy": "analytic"},   # or "numeric"
      "acceptance": {"rel_sup_tol": 1e-3, "threshold_cells": 1.0,
                     "switch_time_rel_tol": 0.01}   # compare only
    }
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .problem import Preferences, StationaryProblem, validate_problem
from .serialize import write_csv, write_json
from .simulate import AnalyticPolicy, GridPolicy, SimConfig, dpp_check, \
    euler_residual, simulate, total_utility
from .solver import Grid, SolverConfig, extract_regions, solve_qvi, solve_vanishing

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_PARSE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_TOLERANCE = 4

_SECTIONS = {"spec_version", "problem", "grid", "solver", "sim", "output", "acceptance"}
_PROBLEM_KEYS = {"regimes", "gamma", "rho", "delta", "pi", "eta"}
_GRID_KEYS = {"k_min", "k_max", "n"}
_SOLVER_KEYS = {"tol", "max_iter", "consumption_mode", "n_c", "damping", "c_floor"}
_SIM_KEYS = {"dt", "t_max", "k0", "i0", "event_tol", "tail_handling", "policy"}
_OUTPUT_KEYS = {"directory", "formats"}
_ACCEPT_KEYS = {"rel_sup_tol", "threshold_cells", "switch_time_rel_tol"}


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_config(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _SECTIONS, "config root")
    if raw.get("spec_version") != 1:
        raise ConfigError(f"unsupported spec_version {raw.get('spec_version')!r}")
    if "problem" not in raw:
        raise ConfigError("config needs a 'problem' section")
    _check_keys(raw["problem"], _PROBLEM_KEYS, "problem")
    for sect, keys in (("grid", _GRID_KEYS), ("solver", _SOLVER_KEYS),
                       ("sim", _SIM_KEYS), ("output", _OUTPUT_KEYS),
                       ("acceptance", _ACCEPT_KEYS)):
        if sect in raw:
            _check_keys(raw[sect], keys, sect)
    return raw


def build_problem(cfg: dict) -> StationaryProblem:
    pc = cfg["problem"]
    try:
        regimes = pc["regimes"]
        A = [float(r["A"]) for r in regimes]
        x = [float(r["x"]) for r in regimes]
        for r in regimes:
            _check_keys(r, {"A", "x"}, "problem.regimes[]")
        prefs = Preferences(gamma=float(pc["gamma"]), rho=float(pc["rho"]),
                            pi=float(pc.get("pi", 0.0)), delta=float(pc.get("delta", 0.0)))
        eta = pc.get("eta", "vanishing")
        if isinstance(eta, list):
            eta = np.asarray(eta, dtype=float)
        return StationaryProblem.from_arrays(A, x, prefs, eta)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad problem section: {exc}") from exc


def build_grid(cfg: dict) -> Grid:
    if "grid" not in cfg:
        raise ConfigError("this subcommand needs a 'grid' section")
    g = cfg["grid"]
    try:
        return Grid(k_min=float(g["k_min"]), k_max=float(g["k_max"]), n=int(g["n"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid section: {exc}") from exc


def build_solver_config(cfg: dict) -> SolverConfig:
    s = cfg.get("solver", {})
    try:
        return SolverConfig(
            tol=float(s.get("tol", 1e-8)),
            max_iter=int(s.get("max_iter", 10000)),
            consumption_mode=s.get("consumption_mode", "closed-form"),
            n_c=int(s.get("n_c", 101)),
            damping=float(s.get("damping", 1.0)),
            c_floor=float(s.get("c_floor", 1e-10)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver section: {exc}") from exc


def build_sim_config(cfg: dict) -> SimConfig:
    s = cfg.get("sim", {})
    try:
        return SimConfig(
            dt=float(s.get("dt", 1e-3)),
            t_max=float(s.get("t_max", 100.0)),
            event_tol=float(s.get("event_tol", 1e-10)),
            tail_handling=s.get("tail_handling", "analytic-tail"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sim section: {exc}") from exc


def _write_meta(out: Path, cfg: dict, command: str) -> None:
    write_json(out / "meta.json", {
        "command": command,
        "package_version": __version__,
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "config": cfg,
    })


def _warn_grid_headroom(p: StationaryProblem, grid: Grid) -> None:
    """Thresholds should sit well inside the grid; warn on stderr otherwise."""
    try:
        cf = analytic.closed_form(p)
    except ValueError:
        return
    finite = cf.kthr[np.isfinite(cf.kthr)]
    if finite.size and grid.k_max < 1.5 * float(np.max(finite)):
        print(f"warning: k_max = {grid.k_max} is below 1.5x the largest "
              f"threshold {float(np.max(finite)):.6g}; boundary effects may "
              "reach the thresholds", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def run_validate(cfg: dict, out: Path) -> int:
    p = build_problem(cfg)
    report = validate_problem(p)
    print(report)
    write_json(out / "validation.json", {
        "valid": report.valid,
        "violations": list(report.violations),
        "notes": list(report.notes),
    })
    return EXIT_OK if report.valid else EXIT_DOMAIN


def run_analytic(cfg: dict, out: Path) -> int:
    p = build_problem(cfg)
    report = validate_problem(p)
    if not report.valid:
        print(report, file=sys.stderr)
        return EXIT_DOMAIN
    if p.n_regimes not in (2, 3):
        print(f"analytic mode covers 2 or 3 regimes, got {p.n_regimes}", file=sys.stderr)
        return EXIT_DOMAIN
    if not p.is_vanishing:
        print("analytic mode requires vanishing switching costs", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        cf = analytic.closed_form(p)
        sol = analytic.two_regime_solution(p) if p.n_regimes == 2 \
            else analytic.three_regime_regions(p)
    except (ValueError, analytic.PropositionPreconditionError) as exc:
        print(f"analytic precondition failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    grid = build_grid(cfg)
    ks = grid.nodes
    thresholds = {
        "Q": list(cf.Q),
        "a": [[cf.a[i, j] for j in range(p.n_regimes)] for i in range(p.n_regimes)],
        "k_thresholds": [[None if math.isnan(cf.kthr[i, j]) else cf.kthr[i, j]
                          for j in range(p.n_regimes)] for i in range(p.n_regimes)],
        "growth_rates": list(cf.g),
        "mpc": list(cf.mpc),
        "regions": sol.regions.as_dict(),
    }
    write_json(out / "thresholds.json", thresholds)
    stay_cols = []
    for i in range(1, p.n_regimes + 1):
        x = p.regime(i).x
        col = np.where(ks > x,
                       cf.Q[i - 1] * np.maximum(ks - x, 1e-300) ** (1.0 - p.prefs.gamma),
                       -math.inf)
        stay_cols.append(col)
    piece = np.array([sol.value(k) for k in ks], dtype=float)
    cons_cols = []
    for i in range(1, p.n_regimes + 1):
        x = p.regime(i).x
        cons_cols.append(np.where(ks > x, cf.mpc[i - 1] * np.maximum(ks - x, 0.0), 0.0))
    header = (["k"] + [f"v_stay_{i}" for i in range(1, p.n_regimes + 1)]
              + ["v_piecewise"] + [f"c_star_{i}" for i in range(1, p.n_regimes + 1)])
    write_csv(out / "value.csv", header, [ks, *stay_cols, piece, *cons_cols])
    print(f"wrote thresholds.json and value.csv to {out}")
    return EXIT_OK


def _solve(cfg: dict, p: StationaryProblem, grid: Grid, scfg: SolverConfig):
    if p.is_vanishing:
        return solve_vanishing(p, grid, scfg)
    return solve_qvi(p, grid, scfg)


def _write_solution(out: Path, p: StationaryProblem, sol) -> None:
    ks = sol.grid.nodes
    I = p.n_regimes
    header = ["k"]
    cols = [ks]
    from .solver import VanishingSolution
    if isinstance(sol, VanishingSolution):
        for i in range(1, I + 1):
            header += [f"v_{i}", f"c_{i}", f"switch_target_{i}"]
            tgt = np.where(sol.active == i, 0, sol.active)
            cols += [sol.v, sol.c_regime[i - 1], tgt.astype(int)]
    else:
        for i in range(1, I + 1):
            header += [f"v_{i}", f"c_{i}", f"switch_target_{i}"]
            cols += [sol.v[i - 1], sol.c[i - 1], sol.switch_target[i - 1].astype(int)]
    write_csv(out / "solution.csv", header, cols)
    write_json(out / "regions.json", extract_regions(sol).as_dict())
    write_json(out / "diagnostics.json", {
        "iterations": sol.iterations,
        "converged": sol.converged,
        **sol.diagnostics,
    })


def run_solve(cfg: dict, out: Path) -> int:
    p = build_problem(cfg)
    report = validate_problem(p)
    if not report.valid:
        print(report, file=sys.stderr)
        return EXIT_DOMAIN
    grid = build_grid(cfg)
    _warn_grid_headroom(p, grid)
    sol = _solve(cfg, p, grid, build_solver_config(cfg))
    _write_solution(out, p, sol)
    print(f"solved in {sol.iterations} iterations (converged={sol.converged}); "
          f"outputs in {out}")
    return EXIT_OK if sol.converged else EXIT_NO_CONVERGENCE


def run_simulate(cfg: dict, out: Path) -> int:
    p = build_problem(cfg)
    report = validate_problem(p)
    if not report.valid:
        print(report, file=sys.stderr)
        return EXIT_DOMAIN
    sim_section = cfg.get("sim", {})
    if "k0" not in sim_section or "i0" not in sim_section:
        print("sim section needs k0 and i0", file=sys.stderr)
        return EXIT_PARSE
    k0, i0 = float(sim_section["k0"]), int(sim_section["i0"])
    scfg = build_sim_config(cfg)
    policy_kind = sim_section.get("policy", "analytic")
    try:
        if policy_kind == "analytic":
            policy = AnalyticPolicy(p)
        elif policy_kind == "numeric":
            sol = _solve(cfg, p, build_grid(cfg), build_solver_config(cfg))
            if not sol.converged:
                print("numeric policy unavailable: solver did not converge",
                      file=sys.stderr)
                return EXIT_NO_CONVERGENCE
            policy = GridPolicy(sol)
        else:
            print(f"unknown policy kind {policy_kind!r}", file=sys.stderr)
            return EXIT_PARSE
    except (ValueError, analytic.PropositionPreconditionError) as exc:
        print(f"policy unavailable: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    traj = simulate(p, policy, i0, k0, scfg)
    R = np.array([p.regime(int(i)).A for i in traj.regime])
    w = np.zeros_like(R)
    write_csv(out / "trajectory.csv",
              ["t", "k", "c", "regime", "u_inst", "U_cum", "R", "w"],
              [traj.t, traj.k, traj.c, traj.regime.astype(int), traj.u_inst,
               traj.U_cum, R, w])
    write_json(out / "events.json", [
        {"time": e.time, "from": e.from_regime, "to": e.to_regime,
         "k": e.k, "cost_charged": e.cost_charged} for e in traj.events
    ])
    r_mid = traj.final_time / 2.0
    summary = {
        "total_utility": total_utility(traj, p),
        "dpp_residual_mid": dpp_check(p, policy, traj, r_mid),
        "euler_residual": euler_residual(traj, p),
        "n_events": len(traj.events),
        "truncated": traj.truncated,
        "truncation_reason": traj.truncation_reason,
        "final_k": traj.final_k,
        "final_regime": traj.final_regime,
    }
    write_json(out / "summary.json", summary)
    print(f"simulated to t = {traj.final_time:g} with {len(traj.events)} switch "
          f"event(s); outputs in {out}")
    return EXIT_OK


def run_compare(cfg: dict, out: Path) -> int:
    p = build_problem(cfg)
    report = validate_problem(p)
    if not report.valid:
        print(report, file=sys.stderr)
        return EXIT_DOMAIN
    if not (p.is_vanishing and p.n_regimes in (2, 3)):
        print("compare mode needs vanishing costs and 2 or 3 regimes", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        oracle = analytic.two_regime_solution(p) if p.n_regimes == 2 \
            else analytic.three_regime_regions(p)
        cf = analytic.closed_form(p)
    except (ValueError, analytic.PropositionPreconditionError) as exc:
        print(f"analytic precondition failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    grid = build_grid(cfg)
    _warn_grid_headroom(p, grid)
    sol = solve_vanishing(p, grid, build_solver_config(cfg))
    if not sol.converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    ks = grid.nodes
    h = grid.h
    v_num = sol.v
    v_an = np.array([oracle.value(k) for k in ks], dtype=float)

    # exclude one cell around every kink (regime thresholds and crossings)
    kinks = [p.regime(i).x for i in range(1, p.n_regimes + 1) if p.regime(i).x > 0]
    kinks += [float(t) for t in cf.kthr[np.isfinite(cf.kthr)].ravel()]
    mask = np.ones(ks.size, dtype=bool)
    for kk in kinks:
        mask &= np.abs(ks - kk) > h
    rel = np.abs(v_num - v_an)[mask] / np.abs(v_an)[mask]
    sup_rel = float(np.max(rel))

    # threshold recovery: first active-regime change vs analytic k12
    k12 = analytic.k_threshold(p, 1, 2)
    flips = np.nonzero(np.diff(sol.active) != 0)[0]
    k_flip = float(ks[flips[0] + 1]) if flips.size else math.nan
    thr_err_cells = abs(k_flip - k12) / h if flips.size else math.inf

    # switch-time reproduction through a follow-on simulation
    sim_section = cfg.get("sim", {})
    k0 = float(sim_section.get("k0", 0.5))
    i0 = int(sim_section.get("i0", 1))
    scfg = build_sim_config(cfg)
    t_switch = math.nan
    t_ref = math.nan
    switch_time_rel_err = math.inf
    try:
        t_ref = analytic.switch_time(p, i0, k0, k12)
        traj = simulate(p, AnalyticPolicy(p), i0, k0, scfg)
        if traj.events:
            t_switch = traj.events[0].time
            switch_time_rel_err = abs(t_switch - t_ref) / abs(t_ref)
    except ValueError:
        pass

    acc = cfg.get("acceptance", {})
    checks = {}
    if "rel_sup_tol" in acc:
        checks["value_sup_rel"] = (sup_rel, float(acc["rel_sup_tol"]),
                                   sup_rel <= float(acc["rel_sup_tol"]))
    if "threshold_cells" in acc:
        checks["threshold_cells"] = (thr_err_cells, float(acc["threshold_cells"]),
                                     thr_err_cells <= float(acc["threshold_cells"]))
    if "switch_time_rel_tol" in acc:
        checks["switch_time_rel"] = (switch_time_rel_err,
                                     float(acc["switch_time_rel_tol"]),
                                     switch_time_rel_err <= float(acc["switch_time_rel_tol"]))
    failing = sorted(name for name, (_, _, ok) in checks.items() if not ok)

    write_json(out / "compare.json", {
        "value_sup_rel_error": sup_rel,
        "excluded_kinks": sorted(kinks),
        "threshold_analytic_k12": k12,
        "threshold_numeric_flip": k_flip,
        "threshold_error_cells": thr_err_cells,
        "switch_time_analytic": t_ref,
        "switch_time_simulated": t_switch,
        "switch_time_rel_error": switch_time_rel_err,
        "checks": {name: {"value": val, "tolerance": tol, "pass": ok}
                   for name, (val, tol, ok) in checks.items()},
        "all_pass": not failing,
    })
    if failing:
        print(f"comparison tolerances failed: {', '.join(failing)}", file=sys.stderr)
        return EXIT_TOLERANCE
    print(f"comparison written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv: "list[str] | None" = None) -> int:
    parser = argparse.ArgumentParser(
        prog="switchgrowth",
        description="Solve, verify, and simulate optimal technology-switching growth models.",
    )
    parser.add_argument("subcommand",
                        choices=["validate", "analytic", "solve", "simulate", "compare"])
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out-dir", type=Path, default=Path("./out"))
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    runner = {
        "validate": run_validate,
        "analytic": run_analytic,
        "solve": run_solve,
        "simulate": run_simulate,
        "compare": run_compare,
    }[args.subcommand]
    try:
        code = runner(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _write_meta(out, cfg, args.subcommand)
    return code


if __name__ == "__main__":
    sys.exit(main())
