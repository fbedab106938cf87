import json
import math

import jsonschema
import pytest

from sixdma.cli import main
from sixdma.config import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    parse_config,
)
from sixdma.errors import ParseError, ValidationError
from sixdma.experiment import (
    POSES_SCHEMA,
    RESULT_HEADER,
    ResultRow,
    poses_document,
    read_results,
    results_csv,
    run_experiment,
    sweep_token,
)

TINY = {
    "system": {"B": 3, "N": 4},
    "scenario": {"mu": 6, "samples": 2},
    "optimizer": {"t_outer": 1, "t_inner": 2},
}


def tiny(**sections):
    data = json.loads(json.dumps(TINY))
    for name, body in sections.items():
        data.setdefault(name, {}).update(body)
    return data


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    cfg = load_config(path)
    assert (cfg.system.B, cfg.system.N) == (16, 4)
    assert (cfg.scenario.mu, cfg.scenario.samples, cfg.scenario.xi) == (35.0, 100, 0.2)
    assert cfg.system.candidates == 64
    assert cfg.system.transmit_power_w == pytest.approx(0.04)
    assert cfg.system.noise_power_w == pytest.approx(1e-8)
    assert cfg.system.d_min_for(cfg.system.layout()) == pytest.approx((math.sqrt(2) / 2 + 0.5) * 0.125)


def test_round_trip():
    cfg = config_from_dict(tiny(sweep={"axis": "xi", "values": [0.0, 0.5]}))
    assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg
    assert config_from_dict(config_to_dict(ExperimentConfig())) == ExperimentConfig()


@pytest.mark.parametrize("data, message", [
    ({"scenario": {"xi": 1.5}}, r"xi must be in \[0,1\]"),
    ({"system": {"foo": 1}}, "unknown key system.foo"),
    ({"bogus": {}}, "unknown section"),
    ({"system": {"B": 2.5}}, "must be an integer"),
    ({"system": {"B": 0}}, "system.B must be positive"),
    ({"experiment": {"schemes": ["magic"]}}, "unknown scheme"),
    ({"sweep": {"axis": "xi", "values": [0.2, 2.0]}}, r"xi must be in \[0,1\]"),
    ({"optimizer": {"delta": 1.5}}, "delta"),
    ({"scenario": {"hotspots": [
        {"distance_m": 50, "radius_m": 5, "azimuth_deg": 0},
        {"distance_m": 55, "radius_m": 5, "azimuth_deg": 0}]}}, "hotspots 0 and 1 overlap"),
])
def test_validation_errors(data, message):
    with pytest.raises(ValidationError, match=message):
        config_from_dict(data)


def test_parse_error_location():
    with pytest.raises(ParseError, match=r"cfg\.json:2:5:"):
        parse_config('{\n    nope\n}', "cfg.json")


def test_hotspot_center_form():
    cfg = config_from_dict({"scenario": {"hotspots": [{"center_m": [50, 0, 0], "radius_m": 5}]}})
    assert cfg.scenario.density().region.hotspots[0].radius == 5


def test_sweep_grid_rows(tmp_path):
    data = tiny(sweep={"axis": "users", "values": [10, 20]}, experiment={"schemes": ["fpa", "proposed"]})
    outputs = run_experiment(config_from_dict(data))
    assert [(o.row.sweep, o.row.scheme) for o in outputs] == [
        (10.0, "fpa"), (10.0, "proposed"), (20.0, "fpa"), (20.0, "proposed")]
    for o in outputs:
        assert o.row.capacity >= 0 and o.row.stderr >= 0
        jsonschema.validate(poses_document(o), POSES_SCHEMA)


def test_results_csv_parses_back(tmp_path):
    rows = [ResultRow(0.5, "fpa", 1.25, 0.125, 3.0), ResultRow(None, "proposed", 2.0, 0.0, 1.0)]
    path = tmp_path / "r.csv"
    path.write_text(results_csv(rows))
    back = read_results(path)
    assert list(back[0]) == RESULT_HEADER
    assert back[0]["capacity_bpshz"] == "1.25" and back[0]["seconds"] == ""
    assert back[1]["sweep"] == ""
    assert results_csv([]) == ",".join(RESULT_HEADER) + "\n"
    assert results_csv(rows, record_timing=True).splitlines()[1].endswith(",3")


def test_result_row_rejects_negative_stderr():
    with pytest.raises(ValueError):
        ResultRow(None, "fpa", 1.0, -0.1, 0.0)


def test_sweep_token():
    assert sweep_token("none", None) == "none"
    assert sweep_token("users", 50.0) == "users50"


def test_cli_success_and_outputs(tmp_path, capsys):
    cfg = write(tmp_path, tiny(experiment={"schemes": ["fpa", "proposed"]}))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["poses_fpa_none.json", "poses_proposed_none.json", "results.csv",
                     "trace_fpa_none.csv", "trace_proposed_none.csv"]
    for name in ("poses_fpa_none.json", "poses_proposed_none.json"):
        jsonschema.validate(json.loads((out / name).read_text()), POSES_SCHEMA)
    assert "proposed:" in capsys.readouterr().out


def test_cli_scheme_override(tmp_path):
    cfg = write(tmp_path, tiny())
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--scheme", "fpa", "--quiet"]) == 0
    assert [r["scheme"] for r in read_results(out / "results.csv")] == ["fpa"]


def test_cli_config_errors_exit_1(tmp_path):
    bad = write(tmp_path, {"scenario": {"xi": 1.5}})
    assert main(["run", "--config", str(bad)]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(bad), "--seed", "-3"])
    assert exc.value.code == 1


def test_cli_runtime_failure_exit_2(tmp_path, monkeypatch, capsys):
    import sixdma.cli

    def boom(cfg):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(sixdma.cli, "run_experiment", boom)
    cfg = write(tmp_path, tiny())
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "solver exploded" in capsys.readouterr().err


def test_cli_byte_determinism(tmp_path):
    cfg = write(tmp_path, tiny(experiment={"schemes": ["fpa", "circular", "proposed"], "seed": 7}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a), "--quiet"]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b), "--quiet"]) == 0
    for p in sorted(a.iterdir()):
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name
