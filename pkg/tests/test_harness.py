"""Config parsing, pipelines, report bundles, determinism, and the CLI."""

import json
import hashlib
from pathlib import Path

import numpy as np
import pytest

from nlwave.cli import main as cli_main
from nlwave.errors import ConfigError, PaddingError
from nlwave.fields import ModelParams, Profile, initial_data
from nlwave.harness import (ExperimentConfig, auto_grid, decay_curve,
                            load_config, run_experiment, scaling_fit,
                            simulate)
from nlwave.integrator import read_snapshot, write_snapshot

TINY_CONFIG = """\
[profile]
kind = gaussian
amplitude = 1.0
center = 0.0
width = 0.8

[model]
p = 3.0

[solver]
dx = 0.05
cfl = 0.5
record_stride = 4

[run]
t_final = 5.0
symmetric = true

[decay]
t_list = 1,2,4

[parallelogram]
v_list = 0,0.5,1.0
r_list = 1,1.5
t_list = 1.5,2,3,4

[worldline]
threshold = 0.3

[rademacher]
n_max = 12
corpus_size = 2
corpus_level = 5
"""


def _write_config(tmp_path, text=TINY_CONFIG):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return path


def test_load_config_round_trip(tmp_path):
    cfg = load_config(_write_config(tmp_path))
    assert cfg.profile.kind == "gaussian"
    assert cfg.profile.width == 0.8
    assert cfg.model.p == 3.0
    assert cfg.dx == 0.05
    assert cfg.t_final == 5.0
    assert cfg.decay_t_list == (1.0, 2.0, 4.0)
    assert cfg.par_r_list == (1.0, 1.5)
    assert cfg.rad_corpus_size == 2

    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    bad = tmp_path / "bad.cfg"
    bad.write_text("[solver]\ndx = not-a-number\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_auto_grid_covers_light_cone_and_sweep():
    cfg = ExperimentConfig(profile=Profile("gaussian", amplitude=1.0,
                                           center=0.0, width=1.0),
                           model=ModelParams(3.0), dx=0.05, t_final=5.0)
    g = auto_grid(cfg)
    st = initial_data(cfg.profile, g)
    lo, hi = st.support_hull()
    assert lo - (cfg.t_final + 1.0) >= g.x_min
    assert hi + (cfg.t_final + 1.0) <= g.x_max

    swept = ExperimentConfig(profile=cfg.profile, model=cfg.model, dx=0.05,
                             t_final=5.0, par_v_list=(1.5,),
                             par_r_list=(2.0,), par_t_list=(4.0,))
    g2 = auto_grid(swept)
    assert g2.x_max >= 1.5 * 4.0 + 2.0 + 1.0


def test_simulate_symmetric_mirror():
    cfg = ExperimentConfig(profile=Profile("gaussian", amplitude=1.0,
                                           center=0.0, width=0.8),
                           model=ModelParams(3.0), dx=0.05,
                           record_stride=4, t_final=3.0, symmetric=True,
                           par_v_list=(), par_r_list=(), par_t_list=())
    traj = simulate(cfg)
    n = traj.n_frames
    np.testing.assert_allclose(traj.times, -traj.times[::-1], atol=0)
    # even data: mirror frames agree exactly, with u_t negated
    for i in (0, n // 4):
        j = n - 1 - i
        np.testing.assert_array_equal(traj.frame_u(i), traj.frame_u(j))
        np.testing.assert_array_equal(traj.frame_ut(i), -traj.frame_ut(j))


def test_decay_curve_zero_span_and_snapshot_consistency(tmp_path):
    cfg = ExperimentConfig(profile=Profile("zero"), model=ModelParams(3.0),
                           dx=0.1, record_stride=2, t_final=3.0,
                           symmetric=True, x_min=-5.0, x_max=5.0,
                           par_v_list=(), par_r_list=(), par_t_list=())
    traj = simulate(cfg)
    curve = decay_curve(traj, [1.0, 2.0])
    assert np.all(curve.A == 0.0)
    with pytest.raises(PaddingError):
        decay_curve(traj, [10.0])

    cfg2 = ExperimentConfig(profile=Profile("gaussian", amplitude=1.0,
                                            center=0.0, width=0.8),
                            model=ModelParams(3.0), dx=0.05,
                            record_stride=4, t_final=4.0, symmetric=True,
                            par_v_list=(), par_r_list=(), par_t_list=())
    traj2 = simulate(cfg2)
    path = tmp_path / "run.nlwt"
    write_snapshot(traj2, path)
    again = read_snapshot(path)
    a = decay_curve(traj2, [1.0, 2.0, 4.0])
    b = decay_curve(again, [1.0, 2.0, 4.0])
    np.testing.assert_allclose(a.A, b.A, atol=1e-12)


def test_scaling_fit_saturator_flagged_and_errors():
    rows = []
    for R in (1.0, 2.0):
        for T in (8.0, 16.0, 32.0, 64.0):
            integral = 0.3 * T
            env = np.sqrt(R * T) + T / R
            rows.append((0.0, 0.0, 0.5, R, T, integral, env, integral / env))
    report = scaling_fit(rows)
    assert report["warnings"]
    exps = report["velocities"]["0.5"]["t_exponent_by_r"]
    assert all(abs(e - 1.0) < 0.05 for e in exps.values())

    with pytest.raises(ConfigError):
        scaling_fit(rows[:4])            # fewer than 8 pairs at fixed v
    flat = [(0.0, 0.0, 0.5, R, T, 1.0, 2.0, 0.5)
            for R in (1.0, 2.0) for T in (8.0, 16.0, 32.0, 64.0)]
    with pytest.raises(ConfigError):
        scaling_fit(flat)
    with pytest.raises(ConfigError):
        scaling_fit([])


def test_run_experiment_zero_profile_marks_success(tmp_path):
    cfg = ExperimentConfig(profile=Profile("zero"), model=ModelParams(3.0),
                           dx=0.1, record_stride=2, t_final=5.0,
                           symmetric=True, x_min=-8.0, x_max=8.0,
                           decay_t_list=(1.0, 2.0),
                           par_v_list=(0.0, 0.5), par_r_list=(1.0,),
                           par_t_list=(1.0, 2.0, 3.0, 4.0),
                           rad_n_max=12, rad_corpus_size=2, rad_corpus_level=5)
    manifest = run_experiment(cfg, tmp_path / "out")
    assert manifest["status"] == "ok"
    assert not [k for k, v in manifest["stages"].items()
                if v["status"] == "failed"]
    assert manifest["stages"]["scaling"]["status"] == "skipped"
    rays = (tmp_path / "out" / "ray_flux.csv").read_text().splitlines()
    assert all(line.split(",")[2] == "0.0" for line in rays[1:])


def test_run_experiment_padding_failure_keeps_independent_stages(tmp_path):
    cfg = ExperimentConfig(profile=Profile("gaussian", amplitude=1.0,
                                           center=0.0, width=0.8),
                           model=ModelParams(3.0), dx=0.05,
                           record_stride=4, t_final=50.0, symmetric=True,
                           x_min=-4.0, x_max=4.0,      # far too small
                           rad_n_max=12, rad_corpus_size=2,
                           rad_corpus_level=5)
    manifest = run_experiment(cfg, tmp_path / "out")
    assert manifest["status"] == "degraded"
    assert manifest["stages"]["simulate"]["status"] == "failed"
    assert manifest["stages"]["decay"]["status"] == "skipped"
    assert manifest["stages"]["rademacher"]["status"] == "ok"
    assert (tmp_path / "out" / "rademacher.json").exists()


def test_run_experiment_deterministic(tmp_path):
    cfg_path = _write_config(tmp_path)
    cfg = load_config(cfg_path)
    m1 = run_experiment(cfg, tmp_path / "a")
    m2 = run_experiment(cfg, tmp_path / "b")
    files1 = sorted(p.name for p in (tmp_path / "a").iterdir())
    files2 = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files1 == files2
    for name in files1:
        b1 = (tmp_path / "a" / name).read_bytes()
        b2 = (tmp_path / "b" / name).read_bytes()
        assert hashlib.sha256(b1).hexdigest() == hashlib.sha256(b2).hexdigest(), name
    # manifest lists a hash for every other output
    assert set(m1["outputs"]) == set(files1) - {"manifest.json"}
    for name, digest in m1["outputs"].items():
        assert hashlib.sha256(
            (tmp_path / "a" / name).read_bytes()).hexdigest() == digest


def test_rademacher_json_schema(tmp_path):
    cfg = ExperimentConfig(profile=Profile("zero"), model=ModelParams(3.0),
                           x_min=-5.0, x_max=5.0, dx=0.1,
                           rad_n_max=12, rad_corpus_size=2, rad_corpus_level=5)
    from nlwave.harness import rademacher_stage
    rademacher_stage(cfg, tmp_path)
    payload = json.loads((tmp_path / "rademacher.json").read_text())
    assert set(payload) == {"lip_bound", "sigma", "K", "delta", "n0", "r",
                            "measure", "accepted_fraction", "band_energies"}
    assert payload["measure"] >= 2.0 - payload["delta"]


def test_cli_subcommands_and_exit_codes(tmp_path, capsys):
    cfg_path = _write_config(tmp_path)
    out = tmp_path / "cli-out"
    for cmd in ("simulate", "diagnose", "decay", "sweep", "worldline",
                "rademacher"):
        code = cli_main(["--config", str(cfg_path), "--out", str(out), cmd])
        assert code == 0, capsys.readouterr().err
    assert (out / "trajectory.nlwt").exists()
    assert (out / "conservation.csv").exists()
    assert (out / "ray_flux.csv").exists()
    assert (out / "decay.csv").exists()
    assert (out / "parallelogram.csv").exists()
    assert (out / "scaling.json").exists()
    assert (out / "worldline.csv").exists()
    assert (out / "extraction.json").exists()
    assert (out / "rademacher.json").exists()

    code = cli_main(["--config", str(tmp_path / "nope.cfg"), "--out",
                     str(out), "simulate"])
    assert code == 2

    # linear override runs the leapfrog path
    code = cli_main(["--config", str(cfg_path), "--out", str(out),
                     "--linear", "--tfinal", "2", "simulate"])
    assert code == 0

    # resource cap surfaces as exit 4
    big = tmp_path / "big.cfg"
    big.write_text(TINY_CONFIG.replace("dx = 0.05", "dx = 0.0000000001"))
    code = cli_main(["--config", str(big), "--out", str(out), "simulate"])
    assert code == 4


def test_cli_report_bundle(tmp_path):
    cfg_path = _write_config(tmp_path)
    out = tmp_path / "bundle"
    assert cli_main(["--config", str(cfg_path), "--out", str(out),
                     "report"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["config_hash"]


def test_decay_curve_bounded_by_sup_norm():
    cfg = ExperimentConfig(profile=Profile("gaussian", amplitude=1.0,
                                           center=0.0, width=0.8),
                           model=ModelParams(3.0), dx=0.05,
                           record_stride=4, t_final=4.0, symmetric=True,
                           par_v_list=(), par_r_list=(), par_t_list=())
    traj = simulate(cfg)
    curve = decay_curve(traj, [1.0, 2.0, 4.0])
    peak = float(np.max(traj.linf_series()))
    assert np.all(curve.A >= 0.0)
    assert np.all(curve.A <= peak)


def test_cli_numerical_fault_exit_code(tmp_path):
    text = TINY_CONFIG.replace("cfl = 0.5",
                               "cfl = 0.5\nnewton_max_iter = 1\nnewton_tol = 1e-16")
    path = tmp_path / "fault.cfg"
    path.write_text(text)
    code = cli_main(["--config", str(path), "--out", str(tmp_path / "o"),
                     "simulate"])
    assert code == 3


def test_reference_config_matches_fixture():
    from conftest import REFERENCE_CONFIG
    cfg = load_config(Path(__file__).parent.parent / "configs" / "reference.cfg")
    assert cfg.profile == REFERENCE_CONFIG.profile
    assert cfg.model == REFERENCE_CONFIG.model
    assert cfg.dx == REFERENCE_CONFIG.dx
    assert cfg.cfl == REFERENCE_CONFIG.cfl
    assert cfg.record_stride == REFERENCE_CONFIG.record_stride
    assert cfg.t_final == REFERENCE_CONFIG.t_final
    assert cfg.par_v_list == REFERENCE_CONFIG.par_v_list
    assert cfg.par_r_list == REFERENCE_CONFIG.par_r_list
    assert cfg.par_t_list == REFERENCE_CONFIG.par_t_list
