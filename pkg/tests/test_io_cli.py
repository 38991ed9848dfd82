import json
from pathlib import Path

import jsonschema
import pytest
from referencing import Registry, Resource

from horolab import cli
from horolab.errors import ConfigurationInvalid
from horolab.io import ExperimentConfig, GoldenRegistry, default_config_path, dumps

SCHEMAS = Path(__file__).resolve().parents[1] / "schemas"
DATA = Path(__file__).resolve().parents[1] / "src" / "horolab" / "data"


def validator(name):
    reg = Registry()
    for p in SCHEMAS.glob("*.json"):
        doc = json.loads(p.read_text())
        reg = reg.with_resource(doc["$id"], Resource.from_contents(doc))
    doc = json.loads((SCHEMAS / name).read_text())
    return jsonschema.Draft202012Validator(doc, registry=reg)


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_dumps_is_canonical():
    a = dumps({"b": [1.0, 0.1], "a": {"y": 2, "x": float("inf")}})
    b = dumps({"a": {"x": float("inf"), "y": 2}, "b": [1.0, 0.1]})
    assert a == b
    assert "0.10000000000000001" in a and '"inf"' in a


def test_default_hash_is_stable():
    assert ExperimentConfig.load().hash == ExperimentConfig.load(default_config_path()).hash
    assert ExperimentConfig.load(overrides=["output_dir='elsewhere'"]).hash == ExperimentConfig.load().hash
    assert ExperimentConfig.load(overrides=["seed=4"]).hash != ExperimentConfig.load().hash


def test_overrides_and_validation(tmp_path):
    cfg = ExperimentConfig.load(overrides=["budgets.B=2.5", "tolerances.geometric=1e-4"])
    assert cfg.budget("B") == 2.5 and cfg.tol("geometric") == 1e-4
    with pytest.raises(ConfigurationInvalid):
        ExperimentConfig.load(overrides=["budgets.B=-1"])
    with pytest.raises(ConfigurationInvalid):
        ExperimentConfig.load(overrides=["seed"])
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [\n")
    with pytest.raises(ConfigurationInvalid):
        ExperimentConfig.load(bad)


def test_config_schema():
    validator("config.v1.json").validate(ExperimentConfig.load().describe())


def test_shipped_data_schemas():
    validator("graph.v1.json").validate(json.loads((DATA / "toy-graph.json").read_text()))
    validator("bundle.v1.json").validate(json.loads((DATA / "genus2-octagon.json").read_text()))


def test_golden_registry(tmp_path):
    reg = GoldenRegistry("0123456789abcdef", {"x": {"value": 1.0, "tol": 0.01, "rel": True}, "n": {"value": 3, "tol": 0}})
    assert reg.matches("x", 1.005) and not reg.matches("x", 1.02)
    assert reg.matches("n", 3) and not reg.matches("n", 4)
    with pytest.raises(KeyError):
        reg.matches("x", 1.0, config_hash="ffffffffffffffff")
    shipped = GoldenRegistry.load()
    assert shipped.config_hash == ExperimentConfig.load().hash


def test_cli_bruhat(tmp_path, capsys):
    assert run(tmp_path, "bruhat", "--matrix", "[[1,1],[1,2]]") == 0
    res = json.loads(capsys.readouterr().out)
    assert res["n"] == pytest.approx(1.0) and res["t"] == pytest.approx(0.0) and res["u"] == pytest.approx(1.0)
    art = json.loads((tmp_path / "bruhat.json").read_text())
    validator("artifact.v1.json").validate(art)
    lines = (tmp_path / "bruhat.csv").read_text().splitlines()
    assert lines[0] == "#tool,horolab"
    assert lines[2].startswith("#config_hash,")


def test_cli_zset_toy(tmp_path, capsys):
    g = str(DATA / "toy-graph.json")
    assert run(tmp_path, "zset", "--graph", g, "--from", "v", "--to", "v") == 0
    res = json.loads(capsys.readouterr().out)
    assert [p["slack"] for p in res["values"]] == [0.0, 1.0, 1.5, 2.0, 2.5, 3.0]


def test_cli_twist_and_chainprox(tmp_path):
    assert run(tmp_path, "twist", "--x", "0.5", "--y", "0.5", "--c", "1.5", "--base", "1.0", "--k-max", "10") == 0
    assert run(tmp_path, "chainprox", "--model", "rotation", "--alpha", "0.25", "--n", "100", "--x", "0", "--y", "25", "--M", "10") == 0
    res = json.loads((tmp_path / "chainprox.json").read_text())["result"]
    assert 0.24 <= res["cost"] <= 0.25 + 1e-12
    assert run(tmp_path, "chainrec", "--model", "rotation", "--alpha", "0.125", "--n", "8", "--x", "0", "--eps", "0.001") == 0


def test_cli_mcshane(tmp_path, capsys):
    data = tmp_path / "f.json"
    data.write_text(json.dumps({"points": [[0, 1], [0, 2]], "values": [0.0, 0.5], "queries": [[0, 1]]}))
    assert run(tmp_path, "mcshane", "--data", str(data)) == 0
    assert json.loads(capsys.readouterr().out)["values"] == [0.0]
    data.write_text(json.dumps({"points": [[0, 1], [0, 2]], "values": [0.0, 5.0]}))
    assert run(tmp_path, "mcshane", "--data", str(data)) == 4


def test_cli_error_codes(tmp_path, capsys):
    assert run(tmp_path, "bruhat", "--matrix", "[[1,2],[2,4]]") == 2
    err = json.loads((tmp_path / "error.json").read_text())
    validator("error.v1.json").validate(err)
    assert err["exit_code"] == 2
    g = tmp_path / "blow.json"
    edges = [{"id": f"e{i}", "src": "v", "dst": "v", "slack": 0.01 + 0.001 * i} for i in range(6)]
    g.write_text(json.dumps({"vertices": [{"id": "v"}], "edges": edges}))
    assert run(tmp_path, "zset", "--graph", str(g), "--from", "v", "--to", "v", "--budget", "3", "--set", "budgets.cap=1000") == 3
    bad = tmp_path / "bad.toml"
    bad.write_text("budgets = 3\n")
    assert run(tmp_path, "bruhat", "--matrix", "[[1,0],[0,1]]", "--config", str(bad)) == 4
    capsys.readouterr()


def test_cli_artifacts_repeatable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["connectors", "--out", str(d)]) == 0
    for name in ("connectors.json", "connectors.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
