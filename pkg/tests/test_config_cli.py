import csv
import json

import numpy as np
import pytest
import yaml

from ranked_bm.cli import main
from ranked_bm.config import dump_config, load_config, parse_config
from ranked_bm.errors import ConfigError
from ranked_bm.io import read_binary, write_binary

ATLAS = {
    "spec": {"size": 5, "drifts": [1, 0, 0, 0, 0], "diffusions": 1.0, "collisions": "symmetric"},
    "initial": "stationary",
    "sim": {"dt": 0.001, "T": 3.0, "burn_in": 0.5, "seed": 7, "replicas": 2},
    "analysis": {"targets": ["trajectory", "gap_stats", "histogram"], "checkpoints": [0.5, 1.0]},
    "output": {"dir": "out", "format": "csv"},
}


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data) if not isinstance(data, str) else data)
    return str(p)


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path / "out")])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_round_trip(tmp_path):
    cfg = load_config(write(tmp_path, "a.yaml", ATLAS))
    again = parse_config(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert again.digest() == cfg.digest()
    assert cfg.spec.g(5) == [1.0, 0.0, 0.0, 0.0, 0.0]


@pytest.mark.parametrize("patch", [
    {"extra": 1},
    {"sim": {"dt": 0.1, "T": 1, "step": 2}},
    {"analysis": {"targets": ["movie"]}},
    {"output": {"format": "xml"}},
    {"initial": "random"},
    {"spec": {"size": None, "drifts": [0], "diffusions": 1.0}},
])
def test_config_rejects_bad_input(tmp_path, patch):
    with pytest.raises(ConfigError):
        parse_config({**ATLAS, **patch})


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_validate_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "validate", "--config", write(tmp_path, "a.yaml", ATLAS)) == 0
    broken = {**ATLAS, "spec": {**ATLAS["spec"], "collisions": {
        "q_plus": [0.5, 0.6, 0.5, 0.5, 0.5], "q_minus": [0.5] * 5}}}
    assert run(tmp_path, "validate", "--config", write(tmp_path, "b.yaml", broken)) == 1
    assert "FAIL q_chain" in capsys.readouterr().out
    assert run(tmp_path, "validate", "--config", write(tmp_path, "c.yaml", "spec: [1,\n")) == 2
    assert run(tmp_path, "validate") == 2


def test_stationary_rates_csv(tmp_path):
    cfg = {**ATLAS, "spec": {**ATLAS["spec"], "size": 10, "drifts": [1] + [0] * 9}}
    assert run(tmp_path, "stationary", "--N", "10", "--config", write(tmp_path, "a.yaml", cfg)) == 0
    rows = read_csv(tmp_path / "out" / "rates.csv")
    assert [float(r["lambda"]) for r in rows] == pytest.approx(
        [2 * (10 - k) / 10 for k in range(1, 10)], rel=1e-14)
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["command"] == "stationary" and "rates.csv" in man["outputs"]


def test_stationary_ladder(tmp_path):
    cfg = {"spec": {"size": "infinite", "drifts": {"prefix": [1, 1], "tail": {"kind": "constant", "value": 0}},
                    "diffusions": 1.0},
           "sim": {"dt": 0.01, "T": 1.0}}
    assert run(tmp_path, "stationary", "--ladder", "4,8,16,32", "--config",
               write(tmp_path, "m.yaml", cfg)) == 0
    out = json.loads((tmp_path / "out" / "ladder.json").read_text())
    assert out["closed_form_limit"]["prefix"] == [2.0, 4.0]
    assert out["closed_form_limit"]["tail"]["value"] == 4.0
    assert out["admissibility"]["verdict"] == "SATISFIED"
    rows = read_csv(tmp_path / "out" / "ladder.csv")
    col1 = [float(r["lambda"]) for r in rows if r["k"] == "1"]
    assert col1 == sorted(col1)


def test_stationary_not_tight(tmp_path, capsys):
    cfg = {**ATLAS, "spec": {**ATLAS["spec"], "drifts": [0] * 5}}
    assert run(tmp_path, "stationary", "--config", write(tmp_path, "z.yaml", cfg)) == 1
    assert "NOT_TIGHT" in capsys.readouterr().out


def test_simulate_outputs_and_seed_precedence(tmp_path, monkeypatch):
    path = write(tmp_path, "a.yaml", {**ATLAS, "sim": {**ATLAS["sim"], "T": 30.0}})
    assert run(tmp_path, "simulate", "--config", path) == 0
    out = tmp_path / "out"
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == {"replica": "0", "time": "0", "series": "Y1", "k": "1", "value": "0"}
    assert {r["series"] for r in rows} == {"Y1", "Z", "L"}
    assert len(read_csv(out / "gap_stats.csv")) == 4
    assert (out / "histogram.csv").exists()
    assert json.loads((out / "manifest.json").read_text())["seed"] == 7
    assert run(tmp_path, "simulate", "--config", write(tmp_path, "s.yaml", ATLAS)) == 0
    summary = json.loads((out / "simulate.json").read_text())
    assert "unavailable" in summary["gap_stats"]
    monkeypatch.setenv("RANKED_BM_SEED", "99")
    assert run(tmp_path, "simulate", "--config", path) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 99
    assert run(tmp_path, "simulate", "--config", path, "--seed", "5") == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 5


def test_simulate_is_reproducible_and_job_independent(tmp_path):
    path = write(tmp_path, "a.yaml", ATLAS)
    main(["simulate", "--config", path, "--out", str(tmp_path / "one")])
    main(["simulate", "--config", path, "--out", str(tmp_path / "two"), "--jobs", "2"])
    a = (tmp_path / "one" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "two" / "trajectory.csv").read_bytes()
    assert b"\r\n" not in a


def test_simulate_binary_and_json(tmp_path):
    path = write(tmp_path, "a.yaml", ATLAS)
    assert run(tmp_path, "simulate", "--config", path, "--format", "binary") == 0
    arr = read_binary(tmp_path / "out" / "trajectory_0.bin")
    assert arr.shape == (3001, 1 + 1 + 4 + 4)
    assert np.all(arr[:, 2:6] >= 0)
    assert run(tmp_path, "simulate", "--config", path, "--format", "json") == 0
    d = json.loads((tmp_path / "out" / "trajectory_1.json").read_text())
    assert len(d["Z"]) == 3001


def test_binary_round_trip(tmp_path):
    a = np.arange(12.0).reshape(3, 4) / 7
    assert np.array_equal(read_binary(write_binary(tmp_path / "x.bin", a)), a)


def test_named_scheme_via_cli(tmp_path):
    cfg = {**ATLAS, "sim": {**ATLAS["sim"], "scheme": "named_euler"},
           "initial": {"kind": "named", "prefix": [0.4, 0.0, 0.3, 0.1, 0.2], "tail": None}}
    assert run(tmp_path, "simulate", "--config", write(tmp_path, "n.yaml", cfg)) == 0
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    holders = [int(r["value"]) for r in rows[:10] if r["series"] == "rank_holder"]
    assert holders == [2, 4, 5, 3, 1]


def test_converge_stationary_start_is_flat(tmp_path):
    cfg = {**ATLAS, "sim": {**ATLAS["sim"], "replicas": 200, "boundary": "bridge"}}
    path = write(tmp_path, "a.yaml", cfg)
    assert run(tmp_path, "converge", "--config", path, "--start", "stationary") == 0
    rows = read_csv(tmp_path / "out" / "converge.csv")
    assert len(rows) == 2 * 4
    # factor 1 couples the start with the baseline exactly
    assert all(r["ks_start"] == r["ks_baseline"] for r in rows)
    assert run(tmp_path, "converge", "--config", path, "--factor", "2") == 0
    rows = read_csv(tmp_path / "out" / "converge.csv")
    assert all(float(r["dominance_margin"]) >= -0.2 for r in rows)


def test_compare_ordered_starts(tmp_path):
    lo = {**ATLAS, "initial": {"kind": "ranked", "prefix": [0, 1, 2, 3, 4], "tail": None}}
    hi = {**ATLAS, "initial": {"kind": "ranked", "prefix": [0, 2, 4, 6, 8], "tail": None}}
    a, b = write(tmp_path, "lo.yaml", lo), write(tmp_path, "hi.yaml", hi)
    assert run(tmp_path, "compare", "--config", a, "--config-b", b, "--inequality", "gaps_le") == 0
    out = json.loads((tmp_path / "out" / "compare.json").read_text())
    assert out["passed"] and max(out["violation_fraction"]) < 0.01
    # the reversed ordering is violated almost everywhere at the start
    assert run(tmp_path, "compare", "--config", b, "--config-b", a, "--inequality", "gaps_le") == 1


def test_collisions_command(tmp_path):
    cfg = {"spec": {"size": 3, "drifts": [1, 0, 0], "diffusions": [1, 1, 3]},
           "initial": {"kind": "ranked", "prefix": [0, 0.5, 1.0], "tail": None},
           "sim": {"dt": 0.001, "T": 2.0, "seed": 1},
           "analysis": {"K": 3, "dts": [0.001, 0.0005]}}
    assert run(tmp_path, "collisions", "--config", write(tmp_path, "c.yaml", cfg)) == 0
    out = json.loads((tmp_path / "out" / "collisions.json").read_text())
    assert out["condition"]["holds"] == [False]
    rows = read_csv(tmp_path / "out" / "collisions.csv")
    assert {float(r["dt"]) for r in rows} == {0.001, 0.0005}
