import csv
import json

import pytest
import yaml

from onlinefwer.cli import main
from onlinefwer.config import ConfigError, build_procedures, build_scenario, parse_config, sweep_points

BASE = {
    "scenario": {"kind": "autocorr", "N": 40, "n": 100, "rho": 0.8},
    "procedures": [
        {"id": "adaptive-spending"},
        {"id": "online-fallback"},
        {"id": "continuous-graph", "closed": True},
        {"id": "continuous-spending", "closed": True},
    ],
    "replications": 30,
    "seed": 11,
}


def _write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_empty_procedures_is_schema_error(tmp_path, capsys):
    path = _write(tmp_path, {**BASE, "procedures": []})
    assert main(["run", str(path)]) == 2
    assert "procedures" in capsys.readouterr().err


def test_bad_field_reports_path(tmp_path, capsys):
    cfg = {**BASE, "scenario": {"kind": "autocorr", "rho": 1.5}}
    assert main(["run", str(_write(tmp_path, cfg))]) == 2
    err = capsys.readouterr().err
    assert "scenario" in err and "rho" in err


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config({**BASE, "bogus": 1})


def test_closed_alpha_spending_rejected():
    with pytest.raises(ConfigError):
        parse_config({**BASE, "procedures": [{"id": "alpha-spending", "closed": True}]})


def test_geometric_needs_pi():
    with pytest.raises(ConfigError):
        parse_config({**BASE, "procedures": [{"id": "geometric"}]})


def test_sweep_order_and_scenario_build():
    cfg = parse_config({**BASE, "sweep": {"pi1": [0.1, 0.2], "rho": [0.0, 0.5]}})
    pts = sweep_points(cfg)
    assert pts == [{"pi1": 0.1, "rho": 0.0}, {"pi1": 0.1, "rho": 0.5}, {"pi1": 0.2, "rho": 0.0}, {"pi1": 0.2, "rho": 0.5}]
    s = build_scenario(cfg, pts[-1])
    assert (s.pi1, s.rho, s.N) == (0.2, 0.5, 40)
    assert list(build_procedures(cfg, s)) == [
        "adaptive-spending", "online-fallback", "continuous-graph-closed", "continuous-spending-closed"
    ]


def test_run_writes_rows_and_is_byte_identical(tmp_path):
    cfg = {**BASE, "sweep": {"pi1": [0.05, 0.1, 0.2]}}
    path = _write(tmp_path, cfg)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", str(path), "--out", str(a), "--workers", "1"]) == 0
    assert main(["run", str(path), "--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _rows(a)
    assert len(rows) == 3 * 4
    assert list(rows[0]) == [
        "scenario", "N", "n", "pi1", "rho", "effect", "lam", "m",
        "procedure", "fwer_hat", "se_fwer", "power_hat", "se_power", "R", "seed",
    ]
    assert rows[0]["R"] == "30" and rows[0]["seed"] == "11" and rows[0]["m"] == "10"


def test_overrides(tmp_path):
    path = _write(tmp_path, BASE)
    out = tmp_path / "o.csv"
    assert main(["run", str(path), "--out", str(out), "--seed", "3", "--replications", "5", "--workers", "1"]) == 0
    rows = _rows(out)
    assert {r["seed"] for r in rows} == {"3"} and {r["R"] for r in rows} == {"5"}


def test_manifest_round_trip(tmp_path):
    path = _write(tmp_path, BASE)
    first = tmp_path / "first.csv"
    assert main(["run", str(path), "--out", str(first), "--workers", "1"]) == 0
    manifest_path = tmp_path / "first.csv.manifest.json"
    manifest = json.loads(manifest_path.read_text())
    assert manifest["library"] == "onlinefwer" and manifest["config"]["seed"] == 11
    second = tmp_path / "second.csv"
    assert main(["run", str(manifest_path), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_platform_columns(tmp_path):
    cfg = {**BASE, "scenario": {"kind": "platform", "N": 8}, "replications": 5}
    out = tmp_path / "p.csv"
    assert main(["run", str(_write(tmp_path, cfg)), "--out", str(out), "--workers", "1"]) == 0
    row = _rows(out)[0]
    assert row["scenario"] == "platform" and row["entry_spacing"] == "2.0"


def test_fig2_grid_row_count(tmp_path):
    cfg = yaml.safe_load(open("configs/autocorr_rho08.yaml"))
    cfg["scenario"]["N"] = 30
    out = tmp_path / "grid.csv"
    assert main(["run", str(_write(tmp_path, cfg)), "--out", str(out), "--replications", "2", "--workers", "1"]) == 0
    rows = _rows(out)
    assert len(rows) == 4 * 10
    assert sorted({float(r["pi1"]) for r in rows}) == [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def test_audit_flags_pathological_spending(tmp_path):
    cfg = {
        "scenario": {"kind": "autocorr", "N": 200, "pi1": 0.1},
        "procedures": [
            {"id": "continuous-graph"},
            {"id": "adaptive-spending"},
            {"id": "geometric", "pi": 0.1},
            {"id": "continuous-spending", "label": "power", "spending": {"kind": "power"}},
        ],
        "replications": 50,
    }
    out = tmp_path / "audit.csv"
    assert main(["audit", str(_write(tmp_path, cfg)), "--out", str(out), "--workers", "1"]) == 0
    rows = {r["procedure"]: r for r in _rows(out)}
    for label in ("continuous-graph", "adaptive-spending", "geometric"):
        assert rows[label]["flagged"] == "false"
        assert float(rows[label]["max_partial_sum"]) <= 0.05 + 1e-9
    assert rows["power"]["flagged"] == "true"
    assert float(rows["power"]["max_partial_sum"]) > 0.05


def test_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2
