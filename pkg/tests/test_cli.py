"""Configuration handling, experiment runner, selftest, command line."""

import json

import numpy as np
import pytest

from temrecon import InputError
from temrecon.cli import (
    ExperimentConfig,
    load_config,
    main,
    run_experiment,
    run_frames,
    save_config,
    selftest,
    synth_random_vsignal,
)


def test_minimal_config_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{}")
    cfg = load_config(path)
    assert cfg.mode == "crossing"
    assert cfg.device_spacing == 1.0
    cfg2 = ExperimentConfig(mode="integrate-and-fire")
    assert cfg2.device_spacing == 0.125


def test_config_rejects_bad_levels(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"b_level": 0.5, "c_bound": 1.0}))
    with pytest.raises(InputError) as err:
        load_config(path)
    assert "b_level" in str(err.value) and "c_bound" in str(err.value)


def test_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"mystery_knob": 3}))
    with pytest.raises(InputError) as err:
        load_config(path)
    assert "mystery_knob" in str(err.value)


def test_config_parse_error_names_location(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"mode": "crossing",\n  "seed": }')
    with pytest.raises(InputError) as err:
        load_config(path)
    assert "line 2" in str(err.value)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(mode="integrate-and-fire", alpha=0.25, seed=11,
                           x_max=16.0, y_max=16.0)
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    again = load_config(path)
    assert again.to_dict() == cfg.to_dict()


def test_synth_signal_hits_target_sup(hat_gen, small_grid, small_window):
    rng = np.random.default_rng(0)
    sig = synth_random_vsignal(small_window, hat_gen, small_grid, rng, 0.8)
    peak = float(np.max(np.abs(sig.render(small_grid).values)))
    assert peak == pytest.approx(0.8, rel=1e-14)


def _small_cfg(**kw):
    args = dict(x_max=12.0, y_max=12.0, seed=5)
    args.update(kw)
    return ExperimentConfig(**args)


def test_run_experiment_deterministic(tmp_path):
    cfg = _small_cfg()
    a, b = tmp_path / "a", tmp_path / "b"
    s1 = run_experiment(cfg, str(a))
    s2 = run_experiment(cfg, str(b))
    assert s1["converged"] and s2["converged"]
    for name in ("events.csv", "convergence.csv", "summary.json",
                 "reconstruction.csv", "config_echo.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_experiment_crossing_converges(tmp_path):
    cfg = _small_cfg()
    summary = run_experiment(cfg, str(tmp_path / "run"))
    assert summary["converged"]
    echoed = load_config(tmp_path / "run" / "config_echo.json")
    assert echoed.to_dict() == cfg.to_dict()
    assert summary["final_error"] <= cfg.tol * 4.0  # relative tolerance times ||f||
    assert summary["density_ok"]
    rows = (tmp_path / "run" / "convergence.csv").read_text().strip().splitlines()
    assert rows[0] == "iter,error_lpq,ratio"
    for row in rows[1:]:
        parts = row.split(",")
        assert np.isfinite(float(parts[1]))


def test_run_experiment_if_alpha_comparison(tmp_path):
    from temrecon import TemConfig

    theta = TemConfig("integrate-and-fire", 1.0, 2.0, 0.25, alpha=0.5).theta
    summaries = {}
    for alpha in (0.0, 0.5):
        cfg = _small_cfg(mode="integrate-and-fire", alpha=alpha, theta=theta)
        summaries[alpha] = run_experiment(cfg, str(tmp_path / f"a{alpha}"))
    assert summaries[0.0]["converged"] and summaries[0.5]["converged"]
    assert summaries[0.5]["r_hat"] >= summaries[0.0]["r_hat"]


def test_run_frames(tmp_path):
    cfg = _small_cfg(frame_signals=2, frame_n_list=[2, 4])
    rep = run_frames(cfg, str(tmp_path / "fr"))
    assert rep["r0_measured"] < 1.0
    assert rep["recon_error"] <= 1e-3
    on_disk = json.loads((tmp_path / "fr" / "frame_report.json").read_text())
    assert on_disk == rep


def test_selftest_pass_and_fault_injection(capsys):
    ok, results = selftest(fast=True)
    assert ok
    ok2, results2 = selftest(fast=True, corrupt_dual=True)
    assert not ok2
    gp, gt = results2["generator"]
    assert gp < gt  # the biorthogonality check fails
    for name, (p, t) in results2.items():
        if name != "generator":
            assert p == t  # every other suite is unaffected


def test_main_exit_codes(tmp_path, capsys):
    assert main(["selftest", "--fast"]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown_key": 1}')
    assert main(["reconstruct", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    cfg = tmp_path / "ok.json"
    cfg.write_text(json.dumps({"x_max": 12.0, "y_max": 12.0, "seed": 3}))
    out = tmp_path / "out"
    assert main(["encode", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert (out / "events.csv").exists()
    assert main(["reconstruct", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert (out / "summary.json").exists()
