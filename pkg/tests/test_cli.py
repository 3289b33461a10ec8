import math

import numpy as np
import pytest
import yaml

from slotqed import cli
from slotqed.errors import ConfigError
from slotqed.scenario import build_scenario, load_scenario, parse_scenario, sweep_points

SINGLE = {
    "seed": 3,
    "trials": 1,
    "solver": "steady",
    "physics": {"temperature": 0.0},
    "box": {"kind": "slot_channel", "length": 1.0e-6},
    "ensemble": {"positions": [[0.0, 1.25e-7, 0.0]]},
    "drive": {"omega0_over_gamma0": 0.01},
    "detuning": {"start": -100, "stop": 100, "points": 201},
}


def _write(tmp_path, data, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_unknown_keys_name_the_field():
    bad = dict(SINGLE, ensemble={"positions": [[0, 0, 0]], "dtt": 1.0})
    with pytest.raises(ConfigError, match=r"ensemble\.dtt"):
        parse_scenario(bad)
    with pytest.raises(ConfigError, match=r"detuning\.points"):
        parse_scenario(dict(SINGLE, detuning={"points": 1}))
    with pytest.raises(ConfigError, match="drive"):
        parse_scenario({k: v for k, v in SINGLE.items() if k != "drive"})


def test_hash_is_canonical():
    a = parse_scenario(SINGLE)
    reordered = dict(reversed(list(SINGLE.items())))
    b = parse_scenario(dict(reordered, output={"directory": "elsewhere"}))
    assert a.config_hash() == b.config_hash()
    c = parse_scenario(dict(SINGLE, seed=4))
    assert c.config_hash() != a.config_hash()


def test_slot_channel_length_from_density():
    cfg = parse_scenario(
        {"drive": {"omega0_over_gamma0": 0.01}, "ensemble": {"n_atoms": 60, "normalized_density": 5.0}, "box": {"kind": "slot_channel"}}
    )
    sc = build_scenario(cfg)
    s = cfg.box.slot
    assert sc.ensemble.n_atoms == 60
    assert sc.box.extents[2] == pytest.approx(60 / (sc.ensemble.density * s.g * s.h))
    pts = sweep_points(cfg.model_copy(update={"sweep": cfg.sweep.model_copy(update={"axis": "density", "values": [1.0, 2.0]})}))
    assert [p[2].ensemble.n_atoms for p in pts] == [60, 60]
    assert pts[0][2].box.extents[2] == pytest.approx(2 * pts[1][2].box.extents[2])


def test_box_length_sweep_keeps_density():
    cfg = parse_scenario(
        {
            "drive": {"omega0_over_gamma0": 0.001},
            "box": {"kind": "cuboid", "units": "lambda", "extents": [0.3, 0.3, 2.0]},
            "ensemble": {"n_atoms": 40},
            "mode": {"kind": "free_space", "propagating": False},
            "sweep": {"axis": "box_length", "values": [0.1, 2.0]},
        }
    )
    pts = sweep_points(cfg)
    assert [p[2].ensemble.n_atoms for p in pts] == [2, 40]
    lam = cfg.physics.lambda_probe
    assert pts[0][2].box.extents == pytest.approx((0.3 * lam, 0.3 * lam, 0.1 * lam))
    assert pts[0][2].box.origin[2] == pytest.approx(-0.05 * lam)


def test_intensity_drive_conversion():
    cfg = parse_scenario(dict(SINGLE, drive={"intensity": 2.8}))
    sc = build_scenario(cfg)
    assert sc.omega0 == pytest.approx(sc.params.gamma0)


def test_run_writes_tables_and_manifest(tmp_path):
    path = _write(tmp_path, SINGLE)
    assert cli.main(["run", str(path), "--out", str(tmp_path / "out"), "-q"]) == cli.EXIT_OK
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == ["config.yaml", "manifest.txt", "shifts.txt", "spectrum_000.txt"]
    lines = (out / "shifts.txt").read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")]
    assert header[0].split()[:4] == ["sweep_value", "omega0", "n_atoms", "shift"]
    assert header[1].split()[3] == "gamma0"
    row = header[2].split()
    shift, reported = float(row[3]), float(row[6])
    assert reported == pytest.approx(shift - 70.0)
    assert float(row[5]) == pytest.approx(35.0, rel=1e-6)
    manifest = dict(l.split(": ", 1) for l in (out / "manifest.txt").read_text().splitlines())
    assert manifest["config_hash"] == load_scenario(path).config_hash()
    assert {"seed", "wall_time_s", "version"} <= manifest.keys()


def test_rerun_and_worker_count_give_identical_tables(tmp_path):
    data = {
        "seed": 9,
        "trials": 4,
        "physics": {"temperature": 300.0},
        "box": {"kind": "slot_channel", "length": 0.5e-6},
        "ensemble": {"n_atoms": 3, "dt": 1.0e-11, "t_total": 1.0e-10},
        "drive": {"omega0_over_gamma0": 0.1},
        "detuning": {"start": -300, "stop": 300, "points": 7},
        "fit": {"model": "none"},
    }
    path = _write(tmp_path, data)
    outs = []
    for i, workers in enumerate(["1", "1", "2"]):
        out = tmp_path / f"o{i}"
        assert cli.main(["run", str(path), "--out", str(out), "--workers", workers, "-q"]) == 0
        outs.append(out)
    for name in ("shifts.txt", "spectrum_000.txt", "config.yaml"):
        first = (outs[0] / name).read_bytes()
        assert all((o / name).read_bytes() == first for o in outs[1:]), name


def test_exit_codes(tmp_path, monkeypatch, capsys):
    bad = _write(tmp_path, dict(SINGLE, bogus=1), "bad.yaml")
    assert cli.main(["run", str(bad)]) == cli.EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    monkeypatch.setenv(cli.WORKERS_ENV, "zero")
    assert cli.main(["run", str(_write(tmp_path, SINGLE))]) == cli.EXIT_CONFIG
    monkeypatch.delenv(cli.WORKERS_ENV)
    # stationary-only solver with moving atoms fails at resolution time
    thermal = dict(SINGLE, physics={"temperature": 300.0}, ensemble={"n_atoms": 2})
    assert cli.main(["run", str(_write(tmp_path, thermal, "t.yaml")), "--out", str(tmp_path / "t")]) == cli.EXIT_CONFIG


def test_runtime_error_exit_code(tmp_path, monkeypatch):
    from slotqed.errors import IntegratorError

    def boom(*a, **kw):
        raise IntegratorError("all trials diverged")

    monkeypatch.setattr("slotqed.dynamics.simulate_spectrum", boom)
    assert cli.main(["run", str(_write(tmp_path, SINGLE)), "--out", str(tmp_path / "o")]) == cli.EXIT_RUNTIME


def test_verify_passes(capsys):
    assert cli.main(["verify"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out
    assert "PF = 1 + 6 pi Gamma_1D / Gamma0 residual" in out


def test_verify_failure_exit_code(monkeypatch):
    from slotqed import verify

    monkeypatch.setattr(verify, "run_checks", lambda: [verify.Check("forced", 1.0, 0.0, "abs 0", False)])
    assert cli.main(["verify", "-q"]) == cli.EXIT_VERIFY


def test_example_scenarios_validate():
    from pathlib import Path

    paths = sorted((Path(__file__).parents[1] / "scenarios").glob("*.yaml"))
    assert paths
    for path in paths:
        # resolve every point the way the run command does
        assert sweep_points(load_scenario(path))
