"""Command line front end.

Subcommands:
  solve     compute an equilibrium (or belief-group equilibria) and write result.json
  diagnose  run the empirical checks on a solved result, write report.json + report.csv
  sweep     solve + diagnose over an n x c grid, write one aggregate sweep.csv
  oracle    cross-check the solver against the brute-force grid oracle (small instances)

Exit codes: 0 success, 1 bad config or input, 2 solver did not converge,
3 strict mode rejected the distribution's assumptions. All file output is
deterministic for a fixed config and seed: no timestamps, sorted JSON keys,
atomic writes.
"""

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, parse_config, solve_hash
from .diagnostics import report_to_dict, run_diagnostics
from .errors import ConfigError, ConvergenceError
from .oracle import oracle_equilibrium
from .preferences import Discrete, summarize
from .solver import (SolverConfig, build_field, estimate_rjk, result_from_dict, result_to_dict,
                     solve_equilibrium, solve_with_beliefs, strategy_from_dict)
from .util import atomic_write_text, dump_json, fmt_cell, stable_seed

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_ASSUMPTIONS = 3

CSV_COLUMNS = ["instance_id", "n", "m", "c", "seed", "converged", "foc_residual",
               "efficiency_prob", "beta_estimate", "extremes_freq", "extremes_bound",
               "theta", "xi", "welfare_qtm", "welfare_opt", "welfare_plurality", "status"]


def _reparse(cfg: ExperimentConfig, seed=None, output_dir=None) -> ExperimentConfig:
    """Apply command line overrides by editing the resolved dict and reparsing."""
    if seed is None and output_dir is None:
        return cfg
    resolved = copy.deepcopy(cfg.resolved)
    if seed is not None:
        resolved["seed"] = seed
    if output_dir is not None:
        resolved["output_dir"] = output_dir
    return parse_config(resolved)


def _assumption_violations(cfg: ExperimentConfig) -> list:
    out = []
    dists = [("distribution", cfg.dist)]
    if cfg.beliefs is not None:
        dists += [(f"beliefs.groups[{i}].distribution", d)
                  for i, d in enumerate(cfg.beliefs.distributions)]
    for label, dist in dists:
        s = summarize(dist, cfg.spec.u_max)
        if not s.assumption1_ok:
            out.append(f"{label}: mean values are not strictly separated (delta={s.delta:g})")
        for v in s.assumption2_report:
            if not v.passed:
                out.append(f"{label}: alternative {v.alternative} fails the "
                           f"own-supporter condition ({v.note})")
    return out


def _load_warm_start(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"solver.warm_start_path: cannot load {path}: {e}") from None
    if isinstance(d, dict) and "result" in d and "strategy" in d.get("result", {}):
        d = d["result"]["strategy"]
    elif isinstance(d, dict) and "strategy" in d:
        d = d["strategy"]
    try:
        return strategy_from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"solver.warm_start_path: not a strategy file: {e}") from None


def _write_json(path: str, payload: dict):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    atomic_write_text(path, dump_json(payload))


def _belief_result_dict(res) -> dict:
    tw = res.true_world
    return {
        "groups": [result_to_dict(r) for r in res.group_results],
        "fractions": res.fractions.tolist(),
        "true_world": {
            "mean_probs": tw.mean_probs.tolist(),
            "win_freq": tw.win_freq.tolist(),
            "efficiency_prob": tw.efficiency_prob,
            "util_argmax_freq": tw.util_argmax_freq.tolist(),
            "welfare_qtm": tw.welfare_qtm,
            "welfare_opt": tw.welfare_opt,
            "trials": tw.trials,
        },
    }


def _solve_to_dir(cfg: ExperimentConfig, out_dir: str):
    """Run the solve described by cfg, write result.json, return (payload, converged)."""
    warm = None
    if cfg.resolved["solver"]["warm_start_path"]:
        warm = _load_warm_start(cfg.resolved["solver"]["warm_start_path"])
    scfg = cfg.solver_config(warm_start=warm)
    if cfg.beliefs is not None:
        res = solve_with_beliefs(cfg.spec, cfg.dist, cfg.beliefs, scfg,
                                 trials=cfg.resolved["diagnostics"]["trials"])
        converged = all(r.converged for r in res.group_results)
        body = _belief_result_dict(res)
        kind = "belief_result"
    else:
        res = solve_equilibrium(cfg.spec, cfg.dist, scfg)
        converged = res.converged
        body = result_to_dict(res)
        kind = "equilibrium"
    payload = {"version": __version__, "kind": kind, "config": cfg.resolved,
               "solve_hash": solve_hash(cfg.resolved), "result": body}
    _write_json(os.path.join(out_dir, "result.json"), payload)
    return payload, converged


def cmd_solve(args) -> int:
    cfg = _reparse(load_config(args.config), seed=args.seed, output_dir=args.output_dir)
    if args.strict:
        bad = _assumption_violations(cfg)
        if bad:
            for line in bad:
                print(f"assumption violated: {line}", file=sys.stderr)
            return EXIT_ASSUMPTIONS
    payload, converged = _solve_to_dir(cfg, cfg.output_dir)
    print(f"wrote {os.path.join(cfg.output_dir, 'result.json')}")
    if payload["kind"] == "equilibrium":
        r = payload["result"]
        print(f"converged: {converged}  foc_residual: {r['foc_residual']:.3e}  "
              f"iterations: {r['outer_iterations']}")
    else:
        tw = payload["result"]["true_world"]
        print(f"converged: {converged}  true-world mean_probs: "
              + " ".join(f"{p:.4f}" for p in tw["mean_probs"]))
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def _csv_line(instance_id, n, m, c, seed, converged, foc_residual, rep, status) -> str:
    cells = [instance_id, n, m, c, seed, converged, foc_residual]
    if rep is None:
        cells += [None] * 9
    else:
        cells += [rep.efficiency.efficiency_prob, rep.theorem1.beta_estimate,
                  rep.extremes.frequency, rep.extremes.bound, rep.efficiency.theta,
                  rep.efficiency.xi, rep.efficiency.welfare_qtm, rep.efficiency.welfare_opt,
                  rep.plurality.welfare_plurality]
    cells.append(status)
    return ",".join(fmt_cell(v) for v in cells)


def _diagnose_result(cfg: ExperimentConfig, result_payload: dict, out_dir: str, seed: int):
    """Shared by diagnose and sweep cells: run checks, write report.json + row."""
    eq = result_from_dict(result_payload["result"], cfg.spec,
                          summarize(cfg.dist, cfg.spec.u_max))
    rep = run_diagnostics(eq, cfg.spec, cfg.dist, cfg.diagnostics_config(seed=seed))
    payload = {"version": __version__, "config": cfg.resolved,
               "solve_hash": result_payload["solve_hash"], "report": report_to_dict(rep)}
    _write_json(os.path.join(out_dir, "report.json"), payload)
    row = _csv_line(cfg.instance_id, cfg.spec.n, cfg.spec.m, cfg.spec.c, cfg.seed,
                    eq.converged, eq.foc_residual, rep, "ok")
    return rep, row


def cmd_diagnose(args) -> int:
    try:
        with open(args.result, encoding="utf-8") as fh:
            rd = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read result file: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = parse_config(rd.get("config", {}))
    if solve_hash(cfg.resolved) != rd.get("solve_hash"):
        print("solve_hash mismatch: config does not describe this result", file=sys.stderr)
        return EXIT_CONFIG
    if rd.get("kind") != "equilibrium":
        print("diagnose needs a plain equilibrium result, not a belief result", file=sys.stderr)
        return EXIT_CONFIG
    if not rd["result"]["converged"]:
        print("result did not converge; nothing to diagnose", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.output_dir or cfg.output_dir
    seed = cfg.seed if args.seed is None else args.seed
    rep, row = _diagnose_result(cfg, rd, out_dir, seed)
    atomic_write_text(os.path.join(out_dir, "report.csv"),
                      ",".join(CSV_COLUMNS) + "\n" + row + "\n")
    print(f"wrote {os.path.join(out_dir, 'report.json')} and report.csv")
    print(f"efficiency_prob: {rep.efficiency.efficiency_prob:.4f}  "
          f"beta: {rep.theorem1.beta_estimate:.3f}  "
          f"plurality welfare: {rep.plurality.welfare_plurality:.4f}")
    return EXIT_OK


def _run_cell(payload):
    resolved_json, n, c, master = payload
    resolved = json.loads(resolved_json)
    resolved["problem"]["n"] = n
    resolved["problem"]["c"] = c
    resolved["seed"] = stable_seed(master, n, c, "solve")
    resolved["sweep"] = None
    cell_dir = os.path.join(resolved["output_dir"], "cells", f"n{n}_c{c:g}")
    resolved["output_dir"] = cell_dir
    cfg = parse_config(resolved)
    result_payload, converged = _solve_to_dir(cfg, cell_dir)
    if not converged:
        row = _csv_line(cfg.instance_id, n, cfg.spec.m, c, cfg.seed, False,
                        result_payload["result"]["foc_residual"], None, "not_converged")
        return n, c, row, False
    _, row = _diagnose_result(cfg, result_payload, cell_dir,
                              stable_seed(master, n, c, "diagnose"))
    return n, c, row, True


def cmd_sweep(args) -> int:
    cfg = _reparse(load_config(args.config), seed=args.seed, output_dir=args.output_dir)
    if cfg.sweep is None:
        print("config error: sweep: config has no sweep section", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.beliefs is not None:
        print("config error: sweep: belief configs cannot be swept", file=sys.stderr)
        return EXIT_CONFIG
    if args.strict:
        bad = _assumption_violations(cfg)
        if bad:
            for line in bad:
                print(f"assumption violated: {line}", file=sys.stderr)
            return EXIT_ASSUMPTIONS
    resolved_json = json.dumps(cfg.resolved)
    cells = [(resolved_json, n, c, cfg.seed)
             for n in sorted(cfg.sweep["n"]) for c in sorted(cfg.sweep["c"])]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(cell) for cell in cells]
    outcomes.sort(key=lambda t: (t[0], t[1]))
    rows = [row for _, _, row, _ in outcomes]
    csv_path = os.path.join(cfg.output_dir, "sweep.csv")
    os.makedirs(cfg.output_dir, exist_ok=True)
    atomic_write_text(csv_path, "\n".join([",".join(CSV_COLUMNS)] + rows) + "\n")
    for n, c, _, ok in outcomes:
        print(f"cell n={n} c={c:g}: {'ok' if ok else 'not_converged'}")
    print(f"wrote {csv_path}")
    return EXIT_OK


def _strategy_residual(strategy, spec, dist, seed) -> float:
    field = build_field(strategy, spec, dist, SolverConfig(seed=seed), iteration=0)
    worst = 0.0
    for t in range(strategy.types.shape[0]):
        u = strategy.types[t]
        a = strategy.votes[t]
        r = estimate_rjk(a, field)
        rhs = ((u[:, None] - u[None, :]) * r).sum(axis=1)
        worst = max(worst, float(np.abs(2.0 * spec.c * a - rhs).max()))
    return worst


def cmd_oracle(args) -> int:
    cfg = _reparse(load_config(args.config), seed=args.seed, output_dir=args.output_dir)
    spec, dist = cfg.spec, cfg.dist
    if cfg.beliefs is not None:
        print("oracle check does not support belief configs", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(dist, Discrete) or spec.m > 3 or spec.n > 12 or dist.support_size > 3:
        print("oracle check needs a finite-support instance with m <= 3, "
              "support <= 3 and n <= 12", file=sys.stderr)
        return EXIT_CONFIG
    eq = solve_equilibrium(spec, dist, cfg.solver_config())
    ostrat, orep = oracle_equilibrium(spec, dist)
    diff = float(np.abs(eq.strategy.votes - ostrat.votes).max())
    oracle_resid = _strategy_residual(ostrat, spec, dist, cfg.seed)
    payload = {
        "version": __version__,
        "config": cfg.resolved,
        "solve_hash": solve_hash(cfg.resolved),
        "solver": result_to_dict(eq),
        "oracle": {
            "types": ostrat.types.tolist(),
            "votes": ostrat.votes.tolist(),
            "converged": orep.converged,
            "cycling": orep.cycling,
            "iterations": orep.iterations,
            "resolution": orep.resolution,
            "foc_residual": oracle_resid,
        },
        "max_abs_vote_diff": diff,
    }
    _write_json(os.path.join(cfg.output_dir, "oracle.json"), payload)
    print(f"wrote {os.path.join(cfg.output_dir, 'oracle.json')}")
    print(f"max |solver - oracle| vote difference: {diff:.3e}  "
          f"oracle foc residual: {oracle_resid:.3e}")
    if not eq.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtmlab",
                                description="quadratic transfers mechanism laboratory")
    p.add_argument("--version", action="version", version=f"qtmlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config, help="path to a config JSON file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--output-dir", default=None, help="override the output directory")

    sp = sub.add_parser("solve", help="compute an equilibrium")
    common(sp)
    sp.add_argument("--strict", action="store_true",
                    help="refuse to run when the distribution violates the model assumptions")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("diagnose", help="run empirical checks on a solved result")
    common(sp, needs_config=False)
    sp.add_argument("--result", required=True, help="path to a result.json from solve")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("sweep", help="solve and diagnose over an n x c grid")
    common(sp)
    sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--strict", action="store_true",
                    help="refuse to run when the distribution violates the model assumptions")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="cross-check the solver on a small instance")
    common(sp)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as e:
        print(f"solver failed: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
