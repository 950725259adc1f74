import json

import numpy as np
import pytest

from qtmlab import ConfigError, Discrete, IndependentMarginals
from qtmlab.config import (default_instance_id, distribution_to_dict, load_config,
                           parse_config, solve_hash)
from qtmlab.util import dump_json


def minimal_raw():
    return {
        "problem": {"m": 2, "n": 4, "c": 1.0},
        "distribution": {"kind": "discrete", "atoms": [
            {"probability": 0.5, "values": [1.0, 0.0]},
            {"probability": 0.5, "values": [0.0, 1.0]},
        ]},
    }


def test_parse_fills_defaults():
    cfg = parse_config(minimal_raw())
    assert cfg.spec.m == 2 and cfg.spec.n == 4 and cfg.spec.u_max == 1.0
    assert isinstance(cfg.dist, Discrete)
    assert cfg.beliefs is None and cfg.sweep is None
    assert cfg.seed == 0 and cfg.output_dir == "out"
    r = cfg.resolved
    assert r["solver"]["damping"] == 0.5
    assert r["solver"]["n_mc"] == 100000
    assert r["diagnostics"]["trials"] == 100000
    assert r["instance_id"] == default_instance_id(r["distribution"], 2, 1.0)


def test_resolved_dict_round_trips_identically():
    cfg = parse_config(minimal_raw())
    again = parse_config(json.loads(json.dumps(cfg.resolved)))
    assert dump_json(again.resolved) == dump_json(cfg.resolved)
    assert solve_hash(again.resolved) == solve_hash(cfg.resolved)


def test_solve_hash_tracks_solve_inputs_only():
    base = parse_config(minimal_raw())
    changed = minimal_raw()
    changed["output_dir"] = "elsewhere"
    changed["diagnostics"] = {"trials": 5}
    assert solve_hash(parse_config(changed).resolved) == solve_hash(base.resolved)
    reseeded = minimal_raw()
    reseeded["seed"] = 9
    assert solve_hash(parse_config(reseeded).resolved) != solve_hash(base.resolved)
    recosted = minimal_raw()
    recosted["problem"]["c"] = 2.0
    assert solve_hash(parse_config(recosted).resolved) != solve_hash(base.resolved)


def test_instance_id_ignores_n_and_c():
    a = minimal_raw()
    b = minimal_raw()
    b["problem"]["n"] = 99
    b["problem"]["c"] = 7.5
    assert parse_config(a).instance_id == parse_config(b).instance_id


def test_unknown_keys_are_rejected_with_paths():
    raw = minimal_raw()
    raw["solvr"] = {}
    with pytest.raises(ConfigError, match="config: unknown field 'solvr'"):
        parse_config(raw)
    raw2 = minimal_raw()
    raw2["solver"] = {"dampign": 0.5}
    with pytest.raises(ConfigError, match="solver: unknown field 'dampign'"):
        parse_config(raw2)


def test_field_errors_name_the_field():
    raw = minimal_raw()
    raw["problem"]["c"] = -1.0
    with pytest.raises(ConfigError, match="problem"):
        parse_config(raw)
    raw2 = minimal_raw()
    raw2["distribution"]["atoms"][0]["probability"] = 0.7
    with pytest.raises(ConfigError, match="sum to 1"):
        parse_config(raw2)
    raw3 = minimal_raw()
    raw3["seed"] = -1
    with pytest.raises(ConfigError, match="seed"):
        parse_config(raw3)
    raw4 = minimal_raw()
    raw4["distribution"] = {"kind": "gaussian"}
    with pytest.raises(ConfigError, match="distribution.kind"):
        parse_config(raw4)


def test_marginals_config():
    raw = minimal_raw()
    raw["problem"] = {"m": 3, "n": 5, "c": 1.0}
    raw["distribution"] = {"kind": "independent", "marginals": [
        {"kind": "uniform", "low": 0.0, "high": 1.0},
        {"kind": "beta", "alpha": 2.0, "beta": 2.0},
        {"kind": "point", "value": 0.25},
    ]}
    cfg = parse_config(raw)
    assert isinstance(cfg.dist, IndependentMarginals)
    assert distribution_to_dict(cfg.dist) == cfg.resolved["distribution"]
    bad = dict(raw)
    bad["distribution"] = {"kind": "independent", "marginals": [
        {"kind": "uniform", "low": 0.0, "high": 2.0},
        {"kind": "point", "value": 0.5},
        {"kind": "point", "value": 0.1},
    ]}
    with pytest.raises(ConfigError, match=r"marginals\[0\]"):
        parse_config(bad)


def test_beliefs_config():
    raw = minimal_raw()
    raw["beliefs"] = {"groups": [
        {"fraction": 0.5, "distribution": raw["distribution"]},
        {"fraction": 0.5, "distribution": raw["distribution"]},
    ]}
    cfg = parse_config(raw)
    assert cfg.beliefs is not None and len(cfg.beliefs.distributions) == 2
    bad = minimal_raw()
    bad["beliefs"] = {"groups": [{"fraction": 0.4, "distribution": bad["distribution"]}]}
    with pytest.raises(ConfigError, match="beliefs.groups"):
        parse_config(bad)


def test_sweep_config_validation():
    raw = minimal_raw()
    raw["sweep"] = {"n": [4, 8], "c": [0.5, 1.0]}
    cfg = parse_config(raw)
    assert cfg.sweep == {"n": [4, 8], "c": [0.5, 1.0]}
    bad = minimal_raw()
    bad["sweep"] = {"n": [1]}
    with pytest.raises(ConfigError, match=r"sweep.n\[0\]"):
        parse_config(bad)


def test_solver_and_diagnostics_objects():
    raw = minimal_raw()
    raw["solver"] = {"damping": 0.25, "n_mc": 777}
    raw["diagnostics"] = {"trials": 123}
    raw["seed"] = 5
    cfg = parse_config(raw)
    scfg = cfg.solver_config()
    assert scfg.damping == 0.25 and scfg.n_mc == 777 and scfg.seed == 5
    assert cfg.solver_config(seed=11).seed == 11
    dcfg = cfg.diagnostics_config()
    assert dcfg.trials == 123 and dcfg.seed == 5


def test_load_config_accepts_result_files(tmp_path):
    cfg = parse_config(minimal_raw())
    direct = tmp_path / "config.json"
    direct.write_text(dump_json(cfg.resolved))
    loaded = load_config(str(direct))
    assert dump_json(loaded.resolved) == dump_json(cfg.resolved)
    wrapped = tmp_path / "result.json"
    wrapped.write_text(dump_json({"config": cfg.resolved, "result": {"x": 1}}))
    from_result = load_config(str(wrapped))
    assert dump_json(from_result.resolved) == dump_json(cfg.resolved)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(str(broken))
