import json

import numpy as np
import pytest

from calderon import cli as _cli
from calderon.geometry import ConfigurationError
from calderon.scenarios import (
    load_scenario,
    make_potential,
    make_rho,
    reference_config,
    validate_config,
)


# ---------------------------------------------------------------------------
# config validation


def test_reference_defaults():
    cfg = reference_config()
    assert cfg["resolution"] == 0.0175
    assert cfg["gamma0"] == [0.0, np.pi / 2]
    assert cfg["v1"]["profile"] == "gaussian"
    assert cfg["v1"]["center"] == [0.2, 0.1]
    assert cfg["v2"]["profile"] == "zero"
    assert cfg["h_list"] == [0.2, 0.14, 0.1, 0.07, 0.05]
    assert len(cfg["cgo_regimes"]) == 2


def test_unknown_top_level_key_fatal():
    with pytest.raises(ConfigurationError) as err:
        validate_config({"name": "x", "seed": 0, "resolutoin": 0.05})
    assert "resolutoin" in str(err.value)


def test_unknown_nested_potential_key_fatal():
    with pytest.raises(ConfigurationError) as err:
        validate_config(
            {"name": "x", "seed": 0, "v1": {"profile": "gaussian", "widht": 0.3}}
        )
    assert "widht" in str(err.value)


def test_missing_required_key_fatal():
    with pytest.raises(ConfigurationError) as err:
        validate_config({"name": "x"})
    assert "seed" in str(err.value)


def test_invalid_json_text_fatal():
    with pytest.raises(ConfigurationError):
        load_scenario('{"name": "x", "seed": 0,}')


def test_wrong_type_fatal():
    with pytest.raises(ConfigurationError):
        validate_config({"name": "x", "seed": 0, "resolution": -0.1})


# ---------------------------------------------------------------------------
# potential and rho profiles


def test_potential_zero():
    assert make_potential({"profile": "zero"}) == 0.0
    assert make_potential(None) == 0.0


def test_potential_gaussian():
    V = make_potential({"profile": "gaussian", "amplitude": 2.0, "center": [0.2, 0.1], "width": 0.25})
    assert V(np.array([0.2 + 0.1j]))[0] == pytest.approx(2.0)
    assert V(np.array([0.9]))[0] < 2e-3


def test_potential_radial_bump_support():
    V = make_potential({"profile": "radial_bump", "amplitude": 1.0, "center": [0.0, 0.0], "width": 0.5})
    vals = V(np.array([0.0, 0.49, 0.51, 0.9]))
    assert vals[0] == pytest.approx(1.0)
    assert vals[1] > 0
    assert vals[2] == 0.0 and vals[3] == 0.0


def test_potential_piecewise():
    V = make_potential({"profile": "piecewise", "pieces": [[0.0, 0.3, 2.0], [0.3, 0.6, -1.0]]})
    vals = V(np.array([0.1, 0.4 + 0.1j, 0.8]))
    assert vals[0] == 2.0
    assert vals[1] == -1.0
    assert vals[2] == 0.0


def test_rho_constant_and_zero():
    assert make_rho(0.0) is None
    f = make_rho(0.3)
    assert np.all(f(np.array([0.1, 0.5j])) == 0.3)


# ---------------------------------------------------------------------------
# scenario resolution


def test_load_scenario_from_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"name": "from-file", "seed": 3, "gamma0": None}))
    sc = load_scenario(path)
    assert sc.name == "from-file"
    assert sc.seed == 3
    assert sc.domain.gamma0 is None


def test_scenario_properties_and_mesh_cache():
    sc = load_scenario({"name": "x", "seed": 0, "resolution": 0.1})
    assert sc.point == 0.2 + 0.1j
    assert all(isinstance(h, float) for h in sc.h_list)
    m1 = sc.build_mesh()
    assert sc.build_mesh() is m1


# ---------------------------------------------------------------------------
# CLI


CHEAP = {"name": "cheap", "seed": 0, "resolution": 0.08}


def _write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_emit_report_empty_results(tmp_path):
    files = _cli.emit_report({}, str(tmp_path), "empty")
    summary = json.loads((tmp_path / "empty_summary.json").read_text())
    assert summary["checks"] == []
    assert summary["command"] == "empty"
    assert len(files) == 2


def test_run_scenario_forward(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, CHEAP)
    out = tmp_path / "out"
    status = _cli.run_scenario(cfg, "forward", out_dir=str(out))
    assert status == 0
    summary = json.loads((out / "forward_summary.json").read_text())
    assert all(c["passed"] for c in summary["checks"])
    for f in ("mesh_vertices.csv", "mesh_cells.csv", "cauchy_v1.csv", "forward_summary.txt"):
        assert (out / f).exists()
    assert "PASS green_identity_relative_error" in capsys.readouterr().out


def test_run_scenario_unknown_command(tmp_path):
    cfg = _write_cfg(tmp_path, CHEAP)
    with pytest.raises(ConfigurationError):
        _cli.run_scenario(cfg, "bogus", out_dir=str(tmp_path))


def test_main_misspelled_key_exits_nonzero(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"name": "x", "seed": 0, "resolutoin": 0.1})
    status = _cli.main(["forward", "--config", cfg, "--out", str(tmp_path)])
    assert status == 1
    assert "resolutoin" in capsys.readouterr().err


def test_main_forward_ok(tmp_path):
    cfg = _write_cfg(tmp_path, CHEAP)
    out = tmp_path / "out"
    assert _cli.main(["forward", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "forward_summary.json").exists()


def test_out_dir_env_override(tmp_path, monkeypatch):
    cfg = _write_cfg(tmp_path, CHEAP)
    env_out = tmp_path / "env_out"
    monkeypatch.setenv("CALDERON_OUT", str(env_out))
    assert _cli.run_scenario(cfg, "forward", out_dir=str(tmp_path / "ignored")) == 0
    assert (env_out / "forward_summary.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_seed_override_recorded(tmp_path):
    cfg = _write_cfg(tmp_path, CHEAP)
    out = tmp_path / "out"
    _cli.run_scenario(cfg, "forward", out_dir=str(out), seed=7)
    summary = json.loads((out / "forward_summary.json").read_text())
    assert summary["seed"] == 7


def test_summary_deterministic_across_runs(tmp_path):
    cfg = _write_cfg(tmp_path, CHEAP)
    blobs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert _cli.run_scenario(cfg, "forward", out_dir=str(out)) == 0
        blobs.append((out / "forward_summary.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_unicode_scenario_name_roundtrip(tmp_path):
    cfg = _write_cfg(tmp_path, {**CHEAP, "name": "café-Ω"})
    out = tmp_path / "out"
    _cli.run_scenario(cfg, "forward", out_dir=str(out))
    summary = json.loads((out / "forward_summary.json").read_text())
    assert summary["name"] == "café-Ω"
    assert "café-Ω" in (out / "forward_summary.json").read_text()
