"""Config schema, experiment runners, CSV emission, CLI entry point."""

import csv
import json
import math
import subprocess

import numpy as np
import pytest

from diffcomm import ConfigurationError, load_codec
from diffcomm.cli import (
    emit_csv,
    main,
    parse_config,
    render_report,
    resolved_config,
    run_simulate,
    run_sweep,
    run_train,
)

SMALL_SOURCE = {"shape": [2, 2, 2], "count": 2}


def _cfg(**overrides):
    base = {"channel": {"snr_db": [3.0]}, "source": dict(SMALL_SOURCE)}
    base.update(overrides)
    return json.dumps(base)


def _write_cfg(tmp_path, text, name="cfg.json"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# parsing


def test_minimal_config_fills_defaults():
    cfg = parse_config('{"channel": {"snr_db": [5]}}')
    assert cfg.seed == 0
    assert (cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end) == (1000, 1e-4, 0.02)
    assert cfg.source.kind == "gaussian"
    assert cfg.source.shape == (8, 8, 4)
    assert (cfg.source.m, cfg.source.v) == (0.0, 1.0)
    assert cfg.channel.type == "awgn"
    assert len(cfg.channel.cells) == 1
    assert cfg.channel.cells[0].sigma2 == pytest.approx(10.0 ** -0.5, rel=1e-15)
    assert not cfg.codec.enabled
    assert (cfg.loss.lam, cfg.loss.gamma) == (0.1, 0.1)
    assert (cfg.train.batch, cfg.train.lr, cfg.train.steps) == (4, 1e-4, 2000)
    assert (cfg.mode.kind, cfg.mode.t_target) == ("adaptive", 200)
    assert cfg.output.csv == "results.csv"
    assert cfg.sweep is None


def test_unknown_keys_name_their_path():
    with pytest.raises(ConfigurationError, match="channel.bogus"):
        parse_config('{"channel": {"snr_db": [5], "bogus": 1}}')
    with pytest.raises(ConfigurationError, match="frobnicate"):
        parse_config('{"channel": {"snr_db": [5]}, "frobnicate": {}}')
    with pytest.raises(ConfigurationError, match="codec.arch.wat"):
        parse_config('{"channel": {"snr_db": [5]}, "codec": {"arch": {"wat": 3}}}')


def test_type_mismatches_name_their_path():
    with pytest.raises(ConfigurationError, match="channel.type"):
        parse_config('{"channel": {"snr_db": [5], "type": 3}}')
    with pytest.raises(ConfigurationError, match="seed"):
        parse_config('{"seed": "x", "channel": {"snr_db": [5]}}')
    with pytest.raises(ConfigurationError, match="train.batch"):
        parse_config('{"channel": {"snr_db": [5]}, "train": {"batch": 0}}')


def test_invalid_json_is_a_config_error():
    with pytest.raises(ConfigurationError, match="invalid JSON"):
        parse_config("{nope")
    with pytest.raises(ConfigurationError, match="top level"):
        parse_config("[1, 2]")


def test_channel_section_required():
    with pytest.raises(ConfigurationError, match="channel"):
        parse_config("{}")


def test_exactly_one_noise_axis():
    with pytest.raises(ConfigurationError, match=r"channel.snr_db, channel.sigma"):
        parse_config('{"channel": {"snr_db": [5], "sigma": [1.0]}}')
    with pytest.raises(ConfigurationError, match=r"channel.snr_db, channel.sigma"):
        parse_config('{"channel": {"type": "awgn"}}')
    with pytest.raises(ConfigurationError, match="nonempty"):
        parse_config('{"channel": {"snr_db": []}}')


def test_sigma_cells_carry_equivalent_snr():
    cfg = parse_config('{"channel": {"sigma": [0.5]}}')
    cell = cfg.channel.cells[0]
    assert cell.sigma2 == 0.25
    assert cell.snr_db == pytest.approx(-10.0 * math.log10(0.25), rel=1e-15)
    with pytest.raises(ConfigurationError, match=r"channel.sigma\[0\]"):
        parse_config('{"channel": {"sigma": [-1.0]}}')


def test_both_compression_settings_rejected():
    with pytest.raises(ConfigurationError, match=r"codec.C, codec.k"):
        parse_config(_cfg(codec={"enabled": True, "C": 64, "k": 0.5}))
    with pytest.raises(ConfigurationError, match=r"codec.C, codec.k"):
        parse_config(_cfg(codec={"enabled": True}))
    with pytest.raises(ConfigurationError, match="codec.k"):
        parse_config(_cfg(codec={"enabled": True, "k": 1.5}))


def test_referenced_files_must_exist(tmp_path):
    with pytest.raises(ConfigurationError, match="source.path"):
        parse_config(_cfg(source={"kind": "file", "path": "/nonexistent.npz"}))
    with pytest.raises(ConfigurationError, match="codec.params_path"):
        parse_config(_cfg(codec={"enabled": True, "k": 0.5, "params_path": "/nonexistent.npz"}))


def test_channel_scoped_keys():
    with pytest.raises(ConfigurationError, match="channel.h"):
        parse_config('{"channel": {"snr_db": [5], "h": [1.0, 0.0]}}')
    with pytest.raises(ConfigurationError, match="channel.h"):
        parse_config('{"channel": {"type": "rayleigh", "snr_db": [5], "h": [0.0, 0.0]}}')
    with pytest.raises(ConfigurationError, match="channel.M"):
        parse_config('{"channel": {"snr_db": [5], "M": 2}}')
    with pytest.raises(ConfigurationError, match="channel.convention"):
        parse_config('{"channel": {"snr_db": [5], "convention": "mmse"}}')


def test_cross_validation():
    with pytest.raises(ConfigurationError, match="codec.enabled, channel.type"):
        parse_config(_cfg(channel={"type": "mimo", "snr_db": [5]},
                          codec={"enabled": True, "k": 0.5}))
    with pytest.raises(ConfigurationError, match="source.shape"):
        parse_config(_cfg(source={"shape": [3, 3, 3], "count": 2}))
    with pytest.raises(ConfigurationError, match="channel.M"):
        parse_config(_cfg(channel={"type": "mimo", "snr_db": [5], "M": 4},
                          source={"shape": [3, 3, 2], "count": 2}))


def test_resolved_config_derives_operating_points():
    cfg = parse_config(json.dumps({
        "channel": {"snr_db": [0.0]},
        "codec": {"enabled": True, "C": 64},
        "mode": {"kind": "fixed_step", "t_target": 200},
    }))
    res = resolved_config(cfg)
    # channel count to compression fraction: round(0.0013 * 64 * 256) = 21
    assert res["codec"]["k"] == pytest.approx(21 / 256, rel=1e-15)
    assert res["codec"]["compressed_length"] == 21
    # unit noise maps to the step whose alpha-bar is nearest 1/2
    assert res["channel"]["cells"][0]["step_u"] == 259
    assert res["mode"]["t_target_sigma2"] > 0.0
    assert res["mode"]["t_target_snr_db"] == pytest.approx(
        -10.0 * math.log10(res["mode"]["t_target_sigma2"]), rel=1e-12
    )
    assert res["schedule"]["max_sigma2"] > 2e4


def test_resolved_config_marks_saturating_cells():
    cfg = parse_config('{"channel": {"sigma": [200.0]}}')
    cell = resolved_config(cfg)["channel"]["cells"][0]
    assert cell["step_u"] is None
    assert cell["saturates"] is True


# ---------------------------------------------------------------------------
# simulate


def test_simulate_row_per_cell_across_channels(tmp_path):
    total = 0
    snrs = [0.0, 3.0, 6.0, 9.0, 12.0]
    for ctype in ("awgn", "rayleigh", "mimo"):
        cfg = parse_config(_cfg(channel={"type": ctype, "snr_db": snrs}))
        result = run_simulate(cfg, out_dir=str(tmp_path / ctype))
        assert [row[0] for row in result.rows] == [ctype] * 5
        assert [row[1] for row in result.rows] == snrs
        total += len(result.rows)
    assert total == 15


def test_simulate_writes_csv_log_and_resolved_config(tmp_path):
    cfg = parse_config(_cfg())
    result = run_simulate(cfg, out_dir=str(tmp_path))
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == "channel,snr_db,sigma2,step_u,trials,psnr_db,ssim,mse"
    assert len(lines) == 1 + len(result.rows)
    assert (tmp_path / "run.log").exists()
    replay = json.loads((tmp_path / "resolved_config.json").read_text())
    assert replay["seed"] == cfg.seed
    assert replay["channel"]["cells"][0]["snr_db"] == 3.0


def test_simulate_is_deterministic_and_thread_invariant(tmp_path):
    text = _cfg(channel={"snr_db": [0.0, 3.0, 6.0]})
    outs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 3)):
        run_simulate(parse_config(text), out_dir=str(tmp_path / name), threads=threads)
        outs.append((tmp_path / name / "results.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_simulate_seed_changes_results(tmp_path):
    a = run_simulate(parse_config(_cfg(seed=1)), out_dir=str(tmp_path / "a"))
    b = run_simulate(parse_config(_cfg(seed=2)), out_dir=str(tmp_path / "b"))
    assert a.rows[0][5] != b.rows[0][5]


def test_simulate_reports_match_rows(tmp_path):
    cfg = parse_config(_cfg())
    result = run_simulate(cfg, out_dir=str(tmp_path))
    assert result.reports is not None
    assert result.reports[0].psnr_db == result.rows[0][5]
    assert result.reports[0].mse == result.rows[0][7]
    assert result.reports[0].n == 2


def test_simulate_compare_mode_columns(tmp_path):
    cfg = parse_config(_cfg(mode={"kind": "compare", "t_target": 200},
                            source={"shape": [2, 2, 2], "count": 4}))
    result = run_simulate(cfg, out_dir=str(tmp_path))
    assert result.header == (
        "channel", "snr_db", "sigma2", "trials",
        "psnr_adaptive_db", "psnr_compensate_db", "psnr_forward_db",
        "delta_adaptive_compensate_db", "delta_compensate_forward_db",
        "ci95_lo_db", "ci95_hi_db",
    )
    row = result.rows[0]
    assert row[9] <= row[10]  # interval is ordered
    assert result.reports is None


def test_simulate_errors_carry_cell_coordinates(tmp_path):
    # sigma^2 = 4e4 exceeds the schedule's maximum representable noise
    cfg = parse_config(_cfg(channel={"sigma": [200.0]}))
    with pytest.raises(RuntimeError, match="cell channel=awgn"):
        run_simulate(cfg, out_dir=str(tmp_path))


def test_simulate_with_codec_round_trip(tmp_path):
    cfg = parse_config(_cfg(codec={"enabled": True, "k": 0.5},
                            source={"shape": [4, 4, 2], "count": 2}))
    result = run_simulate(cfg, out_dir=str(tmp_path))
    assert len(result.rows) == 1
    assert math.isfinite(result.rows[0][5])


# ---------------------------------------------------------------------------
# train and sweep runners


TRAIN_CFG = {
    "channel": {"snr_db": [5.0]},
    "source": {"shape": [2, 2, 2], "count": 2},
    "codec": {"k": 0.5, "arch": {"hidden": 6, "blocks": 1}},
    "train": {"steps": 4, "batch": 2, "holdout": 2, "eval_every": 2},
}


def test_train_writes_params_and_loss_table(tmp_path):
    params, result = run_train(parse_config(json.dumps(TRAIN_CFG)), out_dir=str(tmp_path))
    assert result.header == ("step", "l_kl", "l_mse", "l_g", "total", "eval_psnr")
    assert [row[0] for row in result.rows] == [1, 2, 3, 4]
    assert result.rows[0][5] is None and result.rows[1][5] is not None
    restored = load_codec(str(tmp_path / "codec.npz"))
    assert restored.k == params.k
    assert (tmp_path / "results.csv").exists()


def test_train_requires_compression_setting(tmp_path):
    with pytest.raises(ConfigurationError, match=r"codec.C, codec.k"):
        run_train(parse_config(_cfg()), out_dir=str(tmp_path))


def _sweep_cfg(values, param="lambda", gamma=0.0):
    cfg = dict(TRAIN_CFG)
    cfg["loss"] = {"gamma": gamma}
    cfg["sweep"] = {"param": param, "values": values, "steps": 2, "trials": 2}
    return json.dumps(cfg)


def test_sweep_emits_one_row_per_value(tmp_path):
    result = run_sweep(parse_config(_sweep_cfg([1.0, 0.1, 0.01])), out_dir=str(tmp_path))
    assert result.header == ("param", "value", "psnr_db", "ssim", "mse")
    assert [row[:2] for row in result.rows] == [
        ("lambda", 1.0), ("lambda", 0.1), ("lambda", 0.01)]
    assert all(math.isfinite(row[2]) and math.isfinite(row[4]) for row in result.rows)


def test_sweep_rows_are_reorder_invariant(tmp_path):
    fwd = run_sweep(parse_config(_sweep_cfg([1.0, 0.1])), out_dir=str(tmp_path / "f"))
    rev = run_sweep(parse_config(_sweep_cfg([0.1, 1.0])), out_dir=str(tmp_path / "r"))
    assert {r[1]: r for r in fwd.rows} == {r[1]: r for r in rev.rows}


def test_sweep_requires_section_and_values(tmp_path):
    with pytest.raises(ConfigurationError, match="sweep"):
        run_sweep(parse_config(json.dumps(TRAIN_CFG)), out_dir=str(tmp_path))
    with pytest.raises(ConfigurationError, match="sweep.values"):
        parse_config(_sweep_cfg([]))


def test_sweep_errors_carry_grid_coordinates(tmp_path):
    # C=1 rounds to zero transmitted symbols for an 8-element latent
    with pytest.raises(RuntimeError, match="grid C=1"):
        run_sweep(parse_config(_sweep_cfg([1], param="C")), out_dir=str(tmp_path))


# ---------------------------------------------------------------------------
# CSV and report


def test_emit_csv_empty_table(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv((["a", "b"], []), str(path))
    assert path.read_text() == "a,b\n"


def test_emit_csv_one_row(tmp_path):
    path = tmp_path / "one.csv"
    emit_csv((["x", "y", "z", "w"], [["awgn", 1.25, None, True]]), str(path))
    assert path.read_text() == "x,y,z,w\nawgn,1.25,,1\n"


def test_emit_csv_round_trip_six_significant_digits(tmp_path):
    rng = np.random.default_rng(0)
    values = [float(v) for v in rng.standard_normal(20) * 10.0 ** rng.integers(-8, 9, 20)]
    path = tmp_path / "rt.csv"
    emit_csv((["v"], [[v] for v in values]), str(path))
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    parsed = [float(row[0]) for row in rows[1:]]
    for original, back in zip(values, parsed):
        assert back == pytest.approx(original, rel=1e-5)
        assert format(back, ".6g") == format(original, ".6g")


def test_report_renders_aligned_table(tmp_path):
    path = tmp_path / "t.csv"
    emit_csv((["name", "value"], [["long-row-label", 1.5], ["x", 123.25]]), str(path))
    text = render_report(str(path))
    lines = text.splitlines()
    assert lines[0].startswith("name")
    assert set(lines[1]) == {"-", " "}
    # numeric column is right-aligned: both rows end at the same column
    assert lines[2].endswith("   1.5")
    assert lines[3].endswith("123.25")
    assert len(lines[2]) == len(lines[3])


# ---------------------------------------------------------------------------
# entry point


def test_main_simulate_success(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path, _cfg())
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "results.csv").exists()


def test_main_seed_override_changes_output(tmp_path):
    cfg_path = _write_cfg(tmp_path, _cfg())
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "a"), "--seed", "7"])
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "b"), "--seed", "8"])
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "c"), "--seed", "7"])
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a != (tmp_path / "b" / "results.csv").read_bytes()
    assert a == (tmp_path / "c" / "results.csv").read_bytes()
    with pytest.raises(SystemExit):
        main(["simulate", "--config", cfg_path, "--seed", "x"])
    assert main(["simulate", "--config", cfg_path, "--seed", "-1"]) == 2


def test_main_config_error_exit_code(tmp_path, capsys):
    bad = _write_cfg(tmp_path, '{"channel": {"snr_db": [5], "bogus": 1}}')
    assert main(["simulate", "--config", bad, "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2


def test_main_runtime_error_exit_code(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path, _cfg(channel={"sigma": [200.0]}))
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "runtime error" in err and "cell channel=awgn" in err


def test_main_report_prints_table(tmp_path, capsys):
    path = tmp_path / "r.csv"
    emit_csv((["a", "b"], [["x", 1.0]]), str(path))
    assert main(["report", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("a")


def test_console_script_is_installed():
    proc = subprocess.run(["diffcomm", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout and "sweep" in proc.stdout
