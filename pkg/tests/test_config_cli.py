import json

import pytest
import yaml

from scanplan import scenarios
from scanplan.cli import main
from scanplan.config import DEFAULTS, Config, deep_merge, parse_override
from scanplan.errors import ConfigError, UnreachablePairError
from scanplan.geometry import MeasurementPoint, load_mps, save_mps
from scanplan.uncertainty import SensorUncertaintyCurve, sensor_uncertainty_at


@pytest.fixture(scope="module")
def flat_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("flat")
    scenarios.flat_plate().write(d)
    return d


@pytest.fixture(scope="module")
def tight_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("tight")
    scenarios.tight_plate().write(d)
    return d


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


# -- config ---------------------------------------------------------------


def test_defaults_follow_the_sensor_table():
    s = DEFAULTS["sensor"]
    assert s["near_fov"] == [90.0, 60.0] and s["far_fov"] == [160.0, 90.0]
    assert (s["dof"], s["scan_depth"], s["scan_time"]) == (100.0, 250.0, 5.0)
    assert DEFAULTS["tolerance_pm"] == {"hole": 0.5, "slot": 0.5, "trimming": 0.7, "surface": 1.0}


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        deep_merge(DEFAULTS, {"sampler": {"gama2": 1}})
    with pytest.raises(ConfigError):
        deep_merge(DEFAULTS, {"sampler": 3})


def test_overrides_parse_yaml_values(flat_dir):
    assert parse_override("sampler.max_iter=50") == (["sampler", "max_iter"], 50)
    assert parse_override("candidates.rolls_deg=[0, 45]") == (["candidates", "rolls_deg"], [0, 45])
    cfg = Config.load(flat_dir / "config.yaml", ["sampler.gamma2=0.01", "seed=9"])
    assert cfg["sampler"]["gamma2"] == 0.01 and cfg["seed"] == 9
    with pytest.raises(ConfigError):
        parse_override("no-equals-sign")
    with pytest.raises(ConfigError):
        Config.load(flat_dir / "config.yaml", ["nothing.here=1"])


def test_tolerance_interval_doubles_half_width(flat_dir):
    cfg = Config.load(flat_dir / "config.yaml")
    assert cfg.tolerance_interval("hole") == 1.0
    assert cfg.tolerance_interval("trimming") == pytest.approx(1.4)


def test_bad_bins_rejected(flat_dir):
    cfg = Config.load(flat_dir / "config.yaml", ["report.bins=[0.1, 0.05]"])
    with pytest.raises(ConfigError):
        cfg.validate()


# -- CLI ------------------------------------------------------------------


def test_plan_flat_plate(flat_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["plan", str(flat_dir / "config.yaml"), "-o", str(out)]) == 0
    for name in ("plan.jsonl", "metrics.jsonl", "graph.jsonl", "heatmap.ply"):
        assert (out / name).exists()
    metrics = read_jsonl(out / "metrics.jsonl")
    assert metrics[0]["schema"] == "scanplan.metrics" and metrics[0]["version"] == 1
    kinds = [r for r in metrics if r.get("type") == "kind"]
    assert kinds and all(r["r"] == 1.0 for r in kinds)
    assert "r=100.0%" in capsys.readouterr().out


def test_reported_uncertainty_is_curve_at_reported_angle(flat_dir, tmp_path):
    out = tmp_path / "out"
    main(["plan", str(flat_dir / "config.yaml"), "-o", str(out)])
    curve = SensorUncertaintyCurve.default()
    import math

    for rec in read_jsonl(out / "plan.jsonl"):
        if rec.get("type") == "mp":
            assert rec["u_sen"] == pytest.approx(sensor_uncertainty_at(curve, math.radians(rec["angle_deg"])))


def test_missing_mesh_is_config_error(flat_dir, tmp_path, capsys):
    raw = yaml.safe_load((flat_dir / "config.yaml").read_text())
    raw["part"]["mesh"] = "nope.stl"
    path = flat_dir / "broken.yaml"
    path.write_text(yaml.safe_dump(raw))
    assert main(["plan", str(path), "-o", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_override_is_config_error(flat_dir):
    assert main(["validate-config", str(flat_dir / "config.yaml"), "--set", "bogus=1"]) == 2


def test_validate_config(flat_dir, capsys):
    assert main(["validate-config", str(flat_dir / "config.yaml")]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_empty_mp_set_is_config_error(tmp_path):
    sc = scenarios.flat_plate()
    sc.mps = []
    path = sc.write(tmp_path)
    assert main(["plan", str(path)]) == 2


def test_infeasible_tolerance_exit_code(tmp_path, capsys):
    sc = scenarios.flat_plate()
    first = sc.mps[0]
    sc.mps[0] = MeasurementPoint(first.id, first.position, first.normal, "hole", 0.1, True)
    path = sc.write(tmp_path)
    assert main(["plan", str(path)]) == 4
    assert "budget error" in capsys.readouterr().err


def test_coverage_failure_exit_code(tight_dir, tmp_path, capsys):
    code = main(["plan", str(tight_dir / "config.yaml"), "-o", str(tmp_path),
                 "--set", "sampler.max_iter=3"])
    assert code == 3
    err = capsys.readouterr().err
    assert "coverage error" in err and "uncovered MPs" in err


def test_unreachable_pair_exit_code(flat_dir, tmp_path, monkeypatch, capsys):
    import scanplan.cli as cli

    def boom(*a, **k):
        raise UnreachablePairError("no path between viewpoints 1 and 2")

    monkeypatch.setattr(cli, "run", boom)
    assert main(["plan", str(flat_dir / "config.yaml"), "-o", str(tmp_path)]) == 5
    assert "sequence error" in capsys.readouterr().err


def test_compare_tight_scenario(tight_dir, tmp_path, capsys):
    table = tmp_path / "table.txt"
    assert main(["compare", str(tight_dir / "config.yaml"), "--table", str(table)]) == 0
    rows = {line.split()[0]: line.split() for line in table.read_text().splitlines()[1:]}
    assert rows["rrt"][-1] == "100.0%"
    assert float(rows["baseline"][-1].rstrip("%")) < 100.0
    assert int(rows["rrt"][1]) > int(rows["baseline"][1])


def test_compare_identical_strategies(flat_dir, capsys):
    assert main(["compare", str(flat_dir / "config.yaml"), "--strategies", "baseline", "baseline"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and lines[1] == lines[2]


def test_heatmap_verb(flat_dir, tmp_path):
    out = tmp_path / "h.ply"
    assert main(["heatmap", str(flat_dir / "config.yaml"), "--out", str(out)]) == 0
    assert out.read_text().startswith("ply\n")


def test_seed_flag_changes_seed(flat_dir, tmp_path):
    out = tmp_path / "o"
    main(["plan", str(flat_dir / "config.yaml"), "-o", str(out), "--seed", "4"])
    assert read_jsonl(out / "plan.jsonl")[0]["seed"] == 4
