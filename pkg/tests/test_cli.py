import json

import pytest
import yaml

from edgeprint import cli
from edgeprint.config import ConfigError, RunManifest, load_config, parse_config

SMALL = {
    "bus": {
        "ecus": [
            {"label": "A", "fall_delay_ns": 80, "rise_delay_ns": 100},
            {"label": "B", "fall_delay_ns": 80, "rise_delay_ns": 180, "clock_ppm": 50},
            {"label": "C", "fall_delay_ns": 80, "rise_delay_ns": 260},
        ],
        "ids": {"0x100": "A", 0x120: "B", "0x140": "C"},
    },
    "pipeline": {"seed": 3, "per_id_count": 60, "relief_k": 5},
    "scenario": {"kind": "compromised", "attacker": "A", "spoofed_id": "0x140",
                 "attack_count": 40, "seed": 4,
                 "foreign": {"label": "F", "fall_delay_ns": 80, "rise_delay_ns": 340}},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_config_parsing(cfg_path):
    cfg = load_config(cfg_path)
    assert cfg.bus.id_assignment == {0x100: "A", 0x120: "B", 0x140: "C"}
    assert cfg.scenario.spoofed_id == 0x140
    assert cfg.scenario.normal_count == 40
    assert cfg.scenario.foreign.offset_ns == 260
    assert len(cfg.digest) == 64


@pytest.mark.parametrize("patch", [
    {"bogus": 1},
    {"bus": {"ecus": []}},
    {"scenario": {"kind": "other"}},
    {"scenario": {"spoofed_id": "0x7FF"}},
    {"pipeline": {"features": ["median"]}},
])
def test_config_errors(patch):
    raw = json.loads(json.dumps(SMALL))
    for k, v in patch.items():
        raw[k] = v
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_full_pipeline(tmp_path, cfg_path, capsys):
    cap, feats = tmp_path / "c.bin", tmp_path / "f.csv"
    assert run("simulate", "--config", cfg_path, "-o", cap) == 0
    assert run("extract", cap, "-o", feats) == 0
    assert len(feats.read_text().splitlines()) == 181
    assert run("rank", feats, "--config", cfg_path, "-o", tmp_path / "w.txt") == 0
    ranks = (tmp_path / "w.txt").read_text().splitlines()
    assert ranks[0] == "rank\tfeature\tweight" and len(ranks) == 9
    model = tmp_path / "m.knn"
    assert run("crossval", feats, "--config", cfg_path, "-o", tmp_path / "cv.txt",
               "--model-out", model) == 0
    cv = (tmp_path / "cv.txt").read_text()
    assert "mean_accuracy=1.0" in cv and "fold 5 counts:" in cv
    rep = tmp_path / "r.txt"
    assert run("detect", "--config", cfg_path, "--model", model, "-o", rep) == 0
    assert (tmp_path / "r.table.txt").exists()
    assert "tp=" in rep.read_text()
    assert run("detect", "--config", cfg_path, "--features", feats, "--scenario", "unmonitored",
               "-o", tmp_path / "u.txt") == 0
    capsys.readouterr()
    assert run("report", rep, tmp_path / "u.txt") == 0
    assert capsys.readouterr().out.count("Actual: Attack") == 2

    m = RunManifest.from_json((tmp_path / "r.txt.manifest.json").read_text())
    assert m.command == "detect"
    assert set(m.outputs) == {"r.txt", "r.table.txt"}
    assert m.inputs == {"m.knn": cli.sha256_file(model)}
    assert m.seeds == {"scenario": 4}


def test_seed_override_changes_output(tmp_path, cfg_path):
    run("simulate", "--config", cfg_path, "--per-id-count", "5", "-o", tmp_path / "a.bin")
    run("simulate", "--config", cfg_path, "--per-id-count", "5", "--seed", "99", "-o", tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() != (tmp_path / "b.bin").read_bytes()


def test_exit_codes(tmp_path, cfg_path, capsys):
    assert run("simulate", "-o", tmp_path / "x.bin") == cli.EXIT_CONFIG
    assert run("simulate", "--config", tmp_path / "missing.yaml") == cli.EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("bus: [1, 2")
    assert run("simulate", "--config", bad) == cli.EXIT_CONFIG
    assert run("extract", tmp_path / "nothing.bin") == cli.EXIT_DATA
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"not a log")
    assert run("extract", junk) == cli.EXIT_DATA
    assert run("crossval", junk) == cli.EXIT_DATA
    assert run("detect", "--config", cfg_path) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_crossval_rejects_even_k(tmp_path, cfg_path):
    cap, feats = tmp_path / "c.bin", tmp_path / "f.csv"
    run("simulate", "--config", cfg_path, "-o", cap)
    run("extract", cap, "-o", feats)
    assert run("crossval", feats, "-k", "4", "-o", tmp_path / "cv.txt") == cli.EXIT_DATA
