"""Experiment configuration: JSON in, validated objects out.

A config describes one solve (problem + distribution + solver knobs) plus
optional beliefs, diagnostics settings and a sweep grid. Parsing fills every
default, so the resolved dict embedded in result files reproduces the run
byte for byte when fed back in.
"""

import json
from dataclasses import dataclass

import numpy as np

from .diagnostics import DiagnosticsConfig
from .errors import ConfigError
from .mechanism import ProblemSpec
from .preferences import (Beta, BeliefProfile, Discrete, IndependentMarginals, PointMass,
                          Uniform, validate_distribution)
from .solver import SolverConfig
from .util import canonical_hash

SOLVER_DEFAULTS = {
    "damping": 0.5,
    "inner_tol": 1e-10,
    "outer_tol": 1e-6,
    "max_inner": 200,
    "max_outer": 500,
    "n_mc": 100_000,
    "field_refresh": True,
    "exact_field_cap": 10**6,
    "residual_target": None,
    "warm_start_path": None,
}

DIAGNOSTICS_DEFAULTS = {
    "trials": 100_000,
    "probe_count": 64,
    "epsilon": None,
}


def _check_keys(d: dict, allowed, path: str):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{path}: unknown field {sorted(extra)[0]!r}")


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return d[key]


def _num(d: dict, key: str, path: str):
    v = _require(d, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: must be a number")
    return v


def build_marginal(d: dict, path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: must be an object")
    kind = _require(d, "kind", path)
    if kind == "uniform":
        _check_keys(d, {"kind", "low", "high"}, path)
        return Uniform(low=_num(d, "low", path), high=_num(d, "high", path))
    if kind == "beta":
        _check_keys(d, {"kind", "alpha", "beta", "scale"}, path)
        scale = d.get("scale", 1.0)
        if isinstance(scale, bool) or not isinstance(scale, (int, float)):
            raise ConfigError(f"{path}.scale: must be a number")
        return Beta(alpha=_num(d, "alpha", path), beta=_num(d, "beta", path), scale=scale)
    if kind == "point":
        _check_keys(d, {"kind", "value"}, path)
        return PointMass(value=_num(d, "value", path))
    raise ConfigError(f"{path}.kind: unknown marginal kind {kind!r}")


def build_distribution(d: dict, path: str = "distribution"):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: must be an object")
    kind = _require(d, "kind", path)
    if kind == "discrete":
        _check_keys(d, {"kind", "atoms"}, path)
        atoms = _require(d, "atoms", path)
        if not isinstance(atoms, list) or not atoms:
            raise ConfigError(f"{path}.atoms: must be a non-empty list")
        probs, values = [], []
        for i, entry in enumerate(atoms):
            if not isinstance(entry, dict):
                raise ConfigError(f"{path}.atoms[{i}]: must be an object")
            _check_keys(entry, {"probability", "values"}, f"{path}.atoms[{i}]")
            probs.append(_num(entry, "probability", f"{path}.atoms[{i}]"))
            vals = _require(entry, "values", f"{path}.atoms[{i}]")
            if not isinstance(vals, list):
                raise ConfigError(f"{path}.atoms[{i}].values: must be a list")
            values.append(vals)
        try:
            return Discrete(probs=np.asarray(probs, dtype=float),
                            atoms=np.asarray(values, dtype=float))
        except ConfigError as e:
            msg = str(e)
            raise ConfigError(msg if path == "distribution" else f"{path}: {msg}") from None
        except ValueError as e:
            raise ConfigError(f"{path}.atoms: {e}") from None
    if kind == "independent":
        _check_keys(d, {"kind", "marginals"}, path)
        margs = _require(d, "marginals", path)
        if not isinstance(margs, list) or len(margs) < 2:
            raise ConfigError(f"{path}.marginals: must list at least two marginals")
        built = [build_marginal(mg, f"{path}.marginals[{i}]") for i, mg in enumerate(margs)]
        return IndependentMarginals(tuple(built))
    raise ConfigError(f"{path}.kind: unknown distribution kind {kind!r}")


def _marginal_to_dict(mg) -> dict:
    if isinstance(mg, Uniform):
        return {"kind": "uniform", "low": mg.low, "high": mg.high}
    if isinstance(mg, Beta):
        return {"kind": "beta", "alpha": mg.alpha, "beta": mg.beta, "scale": mg.scale}
    if isinstance(mg, PointMass):
        return {"kind": "point", "value": mg.value}
    raise TypeError(f"unknown marginal type {type(mg).__name__}")


def distribution_to_dict(dist) -> dict:
    if isinstance(dist, Discrete):
        return {"kind": "discrete",
                "atoms": [{"probability": float(p), "values": [float(v) for v in row]}
                          for p, row in zip(dist.probs, dist.atoms)]}
    if isinstance(dist, IndependentMarginals):
        return {"kind": "independent",
                "marginals": [_marginal_to_dict(mg) for mg in dist.marginals]}
    raise TypeError(f"unknown distribution type {type(dist).__name__}")


@dataclass
class ExperimentConfig:
    spec: ProblemSpec
    dist: object
    beliefs: BeliefProfile | None
    sweep: dict | None
    seed: int
    output_dir: str
    instance_id: str
    resolved: dict

    def solver_config(self, seed: int | None = None, warm_start=None) -> SolverConfig:
        s = self.resolved["solver"]
        return SolverConfig(damping=s["damping"], inner_tol=s["inner_tol"],
                            outer_tol=s["outer_tol"], max_inner=s["max_inner"],
                            max_outer=s["max_outer"], n_mc=s["n_mc"],
                            seed=self.seed if seed is None else seed,
                            field_refresh=s["field_refresh"],
                            exact_field_cap=s["exact_field_cap"],
                            residual_target=s["residual_target"],
                            warm_start=warm_start)

    def diagnostics_config(self, seed: int | None = None) -> DiagnosticsConfig:
        d = self.resolved["diagnostics"]
        return DiagnosticsConfig(trials=d["trials"], probe_count=d["probe_count"],
                                 epsilon=d["epsilon"],
                                 seed=self.seed if seed is None else seed)


def default_instance_id(dist_dict: dict, m: int, u_max: float) -> str:
    return canonical_hash({"distribution": dist_dict, "m": m, "u_max": u_max})[:12]


def solve_hash(resolved: dict) -> str:
    """Hash of everything that determines the solve output."""
    return canonical_hash({k: resolved[k] for k in
                           ("problem", "distribution", "beliefs", "solver", "seed")})


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    _check_keys(raw, {"problem", "distribution", "beliefs", "solver", "diagnostics",
                      "sweep", "seed", "output_dir", "instance_id"}, "config")

    prob = _require(raw, "problem", "config")
    if not isinstance(prob, dict):
        raise ConfigError("problem: must be an object")
    _check_keys(prob, {"m", "n", "c", "u_max"}, "problem")
    m = _num(prob, "m", "problem")
    n = _num(prob, "n", "problem")
    c = _num(prob, "c", "problem")
    u_max = prob.get("u_max", 1.0)
    if isinstance(u_max, bool) or not isinstance(u_max, (int, float)):
        raise ConfigError("problem.u_max: must be a number")
    try:
        if int(m) != m or int(n) != n:
            raise ValueError("m and n must be integers")
        spec = ProblemSpec(m=int(m), n=int(n), c=float(c), u_max=float(u_max))
    except ValueError as e:
        raise ConfigError(f"problem: {e}") from None

    dist = build_distribution(_require(raw, "distribution", "config"))
    validate_distribution(dist, spec.u_max)

    beliefs_raw = raw.get("beliefs")
    beliefs = None
    beliefs_resolved = None
    if beliefs_raw is not None:
        if not isinstance(beliefs_raw, dict):
            raise ConfigError("beliefs: must be an object or null")
        _check_keys(beliefs_raw, {"groups"}, "beliefs")
        groups = _require(beliefs_raw, "groups", "beliefs")
        if not isinstance(groups, list) or not groups:
            raise ConfigError("beliefs.groups: must be a non-empty list")
        fracs, dists, groups_resolved = [], [], []
        for i, g in enumerate(groups):
            if not isinstance(g, dict):
                raise ConfigError(f"beliefs.groups[{i}]: must be an object")
            _check_keys(g, {"fraction", "distribution"}, f"beliefs.groups[{i}]")
            fracs.append(_num(g, "fraction", f"beliefs.groups[{i}]"))
            gd = build_distribution(_require(g, "distribution", f"beliefs.groups[{i}]"),
                                    f"beliefs.groups[{i}].distribution")
            try:
                validate_distribution(gd, spec.u_max)
            except ConfigError as e:
                raise ConfigError(f"beliefs.groups[{i}].distribution: {e}") from None
            dists.append(gd)
            groups_resolved.append({"fraction": float(fracs[-1]),
                                    "distribution": distribution_to_dict(gd)})
        try:
            beliefs = BeliefProfile(fractions=np.asarray(fracs, dtype=float),
                                    distributions=tuple(dists))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"beliefs.groups: {e}") from None
        beliefs_resolved = {"groups": groups_resolved}

    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ConfigError("solver: must be an object")
    _check_keys(solver_raw, set(SOLVER_DEFAULTS), "solver")
    solver_resolved = dict(SOLVER_DEFAULTS)
    solver_resolved.update(solver_raw)

    diag_raw = raw.get("diagnostics", {})
    if not isinstance(diag_raw, dict):
        raise ConfigError("diagnostics: must be an object")
    _check_keys(diag_raw, set(DIAGNOSTICS_DEFAULTS), "diagnostics")
    diag_resolved = dict(DIAGNOSTICS_DEFAULTS)
    diag_resolved.update(diag_raw)

    sweep_raw = raw.get("sweep")
    sweep = None
    if sweep_raw is not None:
        if not isinstance(sweep_raw, dict):
            raise ConfigError("sweep: must be an object or null")
        _check_keys(sweep_raw, {"n", "c"}, "sweep")
        ns = sweep_raw.get("n", [spec.n])
        cs = sweep_raw.get("c", [spec.c])
        if not isinstance(ns, list) or not ns:
            raise ConfigError("sweep.n: must be a non-empty list")
        if not isinstance(cs, list) or not cs:
            raise ConfigError("sweep.c: must be a non-empty list")
        for i, v in enumerate(ns):
            if isinstance(v, bool) or not isinstance(v, int) or v < 2:
                raise ConfigError(f"sweep.n[{i}]: must be an integer >= 2")
        for i, v in enumerate(cs):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
                raise ConfigError(f"sweep.c[{i}]: must be a positive number")
        sweep = {"n": [int(v) for v in ns], "c": [float(v) for v in cs]}

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: must be a non-negative integer")

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: must be a non-empty string")

    dist_dict = distribution_to_dict(dist)
    instance_id = raw.get("instance_id")
    if instance_id is None:
        instance_id = default_instance_id(dist_dict, spec.m, spec.u_max)
    elif not isinstance(instance_id, str) or not instance_id:
        raise ConfigError("instance_id: must be a non-empty string")

    # validate the solver/diagnostics numbers by constructing the configs once
    resolved = {
        "problem": {"m": spec.m, "n": spec.n, "c": spec.c, "u_max": spec.u_max},
        "distribution": dist_dict,
        "beliefs": beliefs_resolved,
        "solver": solver_resolved,
        "diagnostics": diag_resolved,
        "sweep": sweep,
        "seed": seed,
        "output_dir": output_dir,
        "instance_id": instance_id,
    }
    cfg = ExperimentConfig(spec=spec, dist=dist, beliefs=beliefs, sweep=sweep, seed=seed,
                           output_dir=output_dir, instance_id=instance_id, resolved=resolved)
    cfg.solver_config()
    cfg.diagnostics_config()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Parse a config file; result files round-trip via their embedded config."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e.strerror or e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON in {path}: {e}") from None
    if isinstance(raw, dict) and "problem" not in raw and "config" in raw:
        raw = raw["config"]
    return parse_config(raw)
