import json
import shutil
from pathlib import Path

import pytest

from kglab import __version__
from kglab.cli import config_hash, load_config, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_admissible_prints_boundary(capsys):
    assert main(["admissible", "--n", "3", "--theta", "1/2", "--denom", "8"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "theta,q,r,s"
    assert all(line.startswith("1/2,") for line in lines[1:])
    assert len(lines) > 2


def test_admissible_rejects_bad_theta(capsys):
    assert main(["admissible", "--theta", "abc"]) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "theta"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path, capsys):
    assert main(["validate", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] and out["config_hash"] == config_hash(load_config(path))


@pytest.mark.parametrize("cfg,field", [
    ({"experiment": "decay-scan", "tolerances": {"exponent": -0.1}}, "tolerances.exponent"),
    ({"experiment": "no-such-thing"}, "experiment"),
    ({"experiment": "square-function", "params": {"p": 4, "count": 0}}, "params.count"),
])
def test_bad_config_exits_2_naming_field(tmp_path, capsys, cfg, field):
    assert main(["run", _write(tmp_path, cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"
    assert field in (err["field"] or "") or field in err["message"]


def test_unreadable_config(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2


def test_config_hash_is_key_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_run_writes_csv_and_json(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_OUTPUT_DIR", str(tmp_path / "out"))
    assert main(["run", str(CONFIGS / "admissible.json")]) == 0
    report = json.loads((tmp_path / "out" / "admissible_n3.json").read_text())
    assert report["status"] == "passed"
    assert report["config_hash"] == config_hash(load_config(CONFIGS / "admissible.json"))
    assert "claimed_bound" in report
    header = (tmp_path / "out" / "admissible_n3.csv").read_text().splitlines()[0]
    assert header.startswith("theta")


def test_runs_are_byte_identical(tmp_path, monkeypatch):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        monkeypatch.setenv("LAB_OUTPUT_DIR", str(d))
        for name in ("vdc.json", "admissible.json"):
            assert main(["run", str(CONFIGS / name)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] and len(outs[0]) == 4


def test_output_dir_from_config(tmp_path, monkeypatch):
    monkeypatch.delenv("LAB_OUTPUT_DIR", raising=False)
    cfg = load_config(CONFIGS / "admissible.json")
    cfg["output"] = {"dir": str(tmp_path / "from_cfg")}
    assert main(["run", _write(tmp_path, cfg)]) == 0
    assert (tmp_path / "from_cfg" / "admissible_n3.csv").exists()


def test_console_script_installed():
    assert shutil.which("lab") is not None
