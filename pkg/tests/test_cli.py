import csv
import subprocess
import sys

import numpy as np
import pytest

from wgbell.cli import ENSEMBLE_COLUMNS, HOMODYNE_COLUMNS, JUMP_COLUMNS, _resolve, build_parser, main
from wgbell.config import Mode, parse_config


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def run(tmp_path, name, *args):
    out = tmp_path / name
    assert main([*args, "--out", str(out)]) == 0
    return out


def test_golden_headers(tmp_path):
    cfg = tmp_path / "h.cfg"
    cfg.write_text("mode = homodyne\nt_max = 0.5\nn_traj = 2\nn_save = 1\n")
    hom = run(tmp_path, "hom", "--config", str(cfg))
    assert read_csv(hom / "trajectory_0.csv")[0] == list(HOMODYNE_COLUMNS)
    assert read_csv(hom / "ensemble.csv")[0] == list(ENSEMBLE_COLUMNS)
    assert HOMODYNE_COLUMNS == (
        "t", "concurrence", "p00", "p11", "p22", "p33",
        "re_rho03", "im_rho03", "re_rho12", "im_rho12", "I_l", "I_r",
    )
    assert JUMP_COLUMNS[-2:] == ("click_l", "click_r")
    header, rows = read_csv(hom / "terminal.csv")
    assert header == ["label", "count"]
    assert sum(int(r[1]) for r in rows) == 2
    assert b"\r\n" not in (hom / "ensemble.csv").read_bytes()


def test_fig2a_preset_keeps_maximal_entanglement(tmp_path):
    out = run(tmp_path, "f2a", "--preset", "fig2a")
    files = sorted(out.glob("trajectory_*.csv"))
    assert len(files) == 12
    for f in files:
        header, rows = read_csv(f)
        data = np.array(rows, dtype=float)
        clicks = data[:, -2:].sum(axis=1)
        if clicks.any():
            first = int(np.argmax(clicks > 0))
            assert np.all(data[first:, 1] >= 1 - 1e-6)


def test_fig4_cumulative_clicks_are_step_functions(tmp_path):
    out = run(tmp_path, "f4", "--preset", "fig4")
    header, rows = read_csv(out / "trajectory_0.csv")
    clicks = np.array([r[-2:] for r in rows], dtype=int)
    assert set(np.unique(clicks)) <= {0, 1}
    assert np.all(np.diff(np.cumsum(clicks, axis=0), axis=0) >= 0)


def test_manifest_reproduces_outputs(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("mode = jump\neta_l = 0.9\nt_max = 1.0\nn_traj = 5\nn_save = 3\n")
    first = run(tmp_path, "a", "--config", str(cfg), "--seed", "77")
    manifest = (first / "manifest.txt").read_text()
    assert parse_config(manifest).master_seed == 77
    second_cfg = tmp_path / "again.cfg"
    second_cfg.write_text(manifest)
    second = run(tmp_path, "b", "--config", str(second_cfg))
    for f in first.glob("*.csv"):
        assert f.read_bytes() == (second / f.name).read_bytes()


def test_worker_count_gives_identical_files(tmp_path):
    cfg = tmp_path / "w.cfg"
    cfg.write_text("mode = homodyne\nt_max = 0.5\nn_traj = 300\nn_save = 2\n")
    one = run(tmp_path, "one", "--config", str(cfg), "--workers", "1")
    two = run(tmp_path, "two", "--config", str(cfg), "--workers", "2")
    for f in one.glob("*.csv"):
        assert f.read_bytes() == (two / f.name).read_bytes()


def test_presets_resolve():
    args = build_parser().parse_args(["--preset", "fig5c"])
    (cfg,) = _resolve(args)
    assert cfg.mode is Mode.HOMODYNE and cfg.eta_r == 0.75 and cfg.eta_l == 0.0
    assert cfg.n_traj == 2000 and cfg.t_max == 15.0
    args = build_parser().parse_args(["--preset", "fig6", "--out", "x", "--observables-only"])
    cfgs = _resolve(args)
    assert [c.initial.value for c in cfgs] == ["gg", "ge", "eg", "ee"]
    assert len({c.output_dir for c in cfgs}) == 4
    assert not any(c.store_states for c in cfgs)


def test_lindblad_mode(tmp_path):
    cfg = tmp_path / "l.cfg"
    cfg.write_text("mode = lindblad\nrecord_every = 100\n")
    out = run(tmp_path, "lind", "--config", str(cfg))
    header, rows = read_csv(out / "lindblad.csv")
    assert float(rows[-1][1]) < 1e-3  # steady state is separable
    assert "steady state" in (out / "manifest.txt").read_text()


def test_oracle_check_mode(tmp_path, capsys):
    cfg = tmp_path / "o.cfg"
    cfg.write_text("mode = oracle_check\nn_traj = 20\nt_max = 0.5\n")
    out = run(tmp_path, "oc", "--config", str(cfg))
    _, rows = read_csv(out / "oracle_check.csv")
    table = {k: float(v) for k, v in rows}
    assert table["no_jump_state"] < 1e-10
    assert table["no_jump_concurrence"] < 1e-9
    assert table["steady_state_residual"] < 1e-12
    assert "homodyne_mean_closed_form" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("eta_r = 1.5\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "x")]) != 0
    assert "eta_r" in capsys.readouterr().err
    cfg.write_text("mode = jump\nbogus = 1\n")
    assert main(["--config", str(cfg)]) != 0
    assert "line 2" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.cfg")]) != 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wgbell", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--preset" in proc.stdout
