import json
import math
from dataclasses import replace

import numpy as np
import pytest
import yaml

from smokering import cli, harness
from smokering.diagnostics import mass_tail
from smokering.errors import CollapseError, ConfigurationError, FitError
from smokering.harness import (DIAG_COLUMNS, ExperimentConfig, config_from_mapping,
                               load_config, run_case, sweep_and_fit)
from smokering.ring_sim import read_checkpoint

BASE = dict(scenario="pair", centers=[[-0.5, 0.0], [0.5, 0.0]], intensities=[1.0, 1.0],
            eps_list=[0.1, 0.05, 1e-3], alpha=3.0, horizon=0.02, particles_per_blob=10)


def make(tmp_path, **kw):
    data = dict(BASE, output_dir=str(tmp_path), **kw)
    return config_from_mapping(data)


def write_yaml(tmp_path, **kw):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(dict(BASE, output_dir=str(tmp_path / "out"), **kw)))
    return path


def test_load_config_coerces_and_sorts(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("scenario: s\ncenters: [[0, 0]]\nintensities: [1]\n"
                    "eps_list: [1e-3, 1e-1, 1e-2]\ndt: auto\ndelta: 1e-3\nhorizon: 1\n")
    cfg = load_config(path)
    assert cfg.eps_list == (0.1, 0.01, 0.001)
    assert cfg.dt is None and cfg.delta == 1e-3 and cfg.horizon == 1.0


@pytest.mark.parametrize("bad", [
    dict(colour="red"),
    dict(eps_list=[1.5]),
    dict(alpha=2.0),
    dict(intensities=[1.0]),
    dict(centers=[[0.0, 0.0], [0.0, 0.0]]),
    dict(particles_per_blob=2.5),
    dict(drift="yes"),
    dict(horizon="auto"),
])
def test_config_errors(tmp_path, bad):
    with pytest.raises(ConfigurationError):
        make(tmp_path, **bad)


def test_missing_keys_and_unreadable(tmp_path):
    with pytest.raises(ConfigurationError):
        config_from_mapping({"scenario": "x"})
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "nope.yaml")


def test_exploratory_alpha(tmp_path):
    cfg = make(tmp_path, alpha=1.5, exploratory=True, eps_list=[0.1])
    res = run_case(cfg, 0.1, write=False)
    assert math.isnan(res.rows[0]["support_bound"])


def test_run_case_outputs(tmp_path):
    cfg = make(tmp_path)
    res = run_case(cfg, 0.1)
    t = sorted({r["t"] for r in res.rows})
    assert t[0] == 0.0 and np.all(np.diff(t) > 0)
    gaps = np.diff(t)
    np.testing.assert_allclose(gaps[:-1], res.dt, rtol=1e-9)
    assert 0.0 < gaps[-1] <= res.dt * (1 + 1e-12)
    assert t[-1] == cfg.horizon
    assert res.rows[0]["delta"] < 1e-15
    assert res.completed and res.circulation_exact and res.sandwich_violations == 0
    header = open(res.diag_path).readline().strip().split(",")
    assert tuple(header) == DIAG_COLUMNS
    assert len(read_checkpoint(res.checkpoint_path)) == 2
    assert res.r_m == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ConfigurationError):
        run_case(cfg, 0.2)


def test_containment_agrees_with_mass_tail(tmp_path):
    cfg = make(tmp_path, horizon=0.05)
    res = run_case(cfg, 0.1, write=False)
    assert res.containment
    from smokering.ring_sim import init_blobs
    blobs = init_blobs(cfg.sim_params(0.1), cfg.centers, cfg.intensities)
    for b in blobs:
        assert mass_tail(b, res.r_m / 4) == 0.0
    assert all(r["Rt"] <= res.r_m / 4 for r in res.rows)


def test_breach_detected(tmp_path):
    # the blobs almost touch, so R_m / 4 is smaller than eps
    cfg = make(tmp_path, centers=[[-0.11, 0.0], [0.11, 0.0]], eps_list=[0.1], horizon=0.5)
    res = run_case(cfg, 0.1, write=False, max_steps=2)
    assert not res.containment and res.breach_time == 0.0
    assert not res.completed


def test_single_ring_drift_speed(tmp_path):
    speeds = []
    for eps in (0.1, 0.01):
        cfg = make(tmp_path, centers=[[0.0, 0.0]], intensities=[1.0], eps_list=[eps],
                   particles_per_blob=12)
        res = run_case(cfg, eps, write=False, max_steps=40)
        assert res.r_m is None and res.containment
        speed = res.final_delta / res.final_time
        speeds.append(speed * abs(math.log(eps)) ** (cfg.alpha - 1))
    assert max(speeds) < 1.0


def test_determinism(tmp_path):
    a = run_case(make(tmp_path / "a"), 0.1)
    b = run_case(make(tmp_path / "b"), 0.1)
    c = run_case(make(tmp_path / "c", workers=3), 0.1)
    text = open(a.diag_path).read()
    assert text == open(b.diag_path).read() == open(c.diag_path).read()
    assert open(a.checkpoint_path).read() == open(c.checkpoint_path).read()


def test_sweep_needs_enough_eps(tmp_path):
    with pytest.raises(FitError):
        sweep_and_fit(make(tmp_path, eps_list=[0.1]))
    with pytest.raises(FitError):
        sweep_and_fit(make(tmp_path, eps_list=[0.1, 0.05, 0.02]))


def test_fit_rate_exact_power_law():
    x = np.log([2.0, 4.0, 8.0])
    slope, const, resid = harness.fit_rate(x, 3.0 * np.exp(x) ** -2)
    assert slope == pytest.approx(-2.0) and const == pytest.approx(3.0) and resid < 1e-12
    assert math.isnan(harness.fit_rate(x, [1.0, 0.0, 1.0])[0])


def test_sweep_partial_results_on_failure(tmp_path, monkeypatch):
    cfg = make(tmp_path)
    real = harness.run_case

    def flaky(config, eps, **kw):
        if eps == min(config.eps_list):
            raise CollapseError(0.5, (0, 1), 0.0)
        return real(config, eps, **kw)

    monkeypatch.setattr(harness, "run_case", flaky)
    with pytest.raises(CollapseError):
        sweep_and_fit(cfg)
    partial = json.loads((tmp_path / "report_partial.json").read_text())
    assert sorted(p["eps"] for p in partial) == [0.05, 0.1]


def test_reduced_sweep_trend(tmp_path):
    cfg = make(tmp_path, eps_list=[0.1, 0.01, 0.001], horizon=0.01,
               particles_per_blob=12, diag_every=50)
    rep = sweep_and_fit(cfg)
    assert rep.eps_list == [0.1, 0.01, 0.001]
    assert rep.delta_monotone and rep.support_monotone and all(rep.containment)
    assert rep.support_slope < 0.0 and rep.delta_slope < 0.0
    assert rep.delta_slope_predicted == -2.0 and rep.support_slope_predicted == -0.5
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["final_delta"] == rep.final_delta
    # a single case reproduces its sweep row exactly
    single = run_case(cfg, 0.01, write=False)
    assert single.final_delta == rep.final_delta[1]


def test_env_overrides_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUTPUT_DIR_ENV, str(tmp_path / "env"))
    cfg = make(tmp_path / "cfg")
    assert cfg.out_dir() == tmp_path / "env"


# --------------------------------------------------------------------------- #
# command line

def test_cli_kernel_test(tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert cli.main(["kernel-test", "--a-min", "1e-3", "--a-max", "10", "--points", "5",
                     "-o", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "a,i1,i2,r1,r2,err_est" and len(rows) == 6
    assert cli.main(["kernel-test", "--a-min", "0", "--a-max", "1", "--points", "3"]) == 2


def test_cli_simulate_and_self_check(tmp_path, capsys):
    path = write_yaml(tmp_path)
    assert cli.main(["simulate", "--config", str(path), "--eps", "0.1", "--self-check"]) == 0
    assert (tmp_path / "out" / "diag_0.1.csv").exists()
    assert (tmp_path / "out" / "checkpoint_0.1.csv").exists()
    assert cli.main(["simulate", "--config", str(path), "--eps", "0.3"]) == 2


def test_cli_pv_run(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUTPUT_DIR_ENV, str(tmp_path / "env"))
    path = write_yaml(tmp_path, horizon=0.1)
    assert cli.main(["pv-run", "--config", str(path), "--self-check"]) == 0
    traj = (tmp_path / "env" / "pv_trajectory.csv").read_text().splitlines()
    inv = (tmp_path / "env" / "pv_invariants.csv").read_text().splitlines()
    assert traj[0] == "t,i,z1,z2" and len(traj) == 1 + 2 * 101
    assert inv[0] == "t,H,P1,P2,A" and len(inv) == 102


def test_cli_exit_codes(tmp_path, monkeypatch):
    path = write_yaml(tmp_path)
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: x\nwhat: 1\n")
    assert cli.main(["sweep", "--config", str(bad)]) == 2

    def boom(*a, **k):
        raise CollapseError(0.1, (0, 1), 1e-9)

    monkeypatch.setattr(harness, "run_case", boom)
    assert cli.main(["simulate", "--config", str(path), "--eps", "0.1"]) == 3
    monkeypatch.undo()

    path = write_yaml(tmp_path, horizon=1e-3)
    real = harness.sweep_and_fit
    monkeypatch.setattr(harness, "sweep_and_fit",
                        lambda cfg: replace(real(cfg, write=False), delta_monotone=False))
    assert cli.main(["sweep", "--config", str(path)]) == 0
    assert cli.main(["sweep", "--config", str(path), "--self-check"]) == 4
