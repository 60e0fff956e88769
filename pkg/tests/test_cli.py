import csv
import json

import pytest

from scsamp.cli import main

SMALL = dict(n=200, m1=4, L=2, ell=30, xi=0.5, delta=0.3, sigma=1e-2, epsilon=0.1, t_max=20)


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL))
    return path


def _header(path):
    return next(csv.reader(path.read_text().splitlines()))


def test_evolve(tmp_path, config):
    out, svg, dump = tmp_path / "p.csv", tmp_path / "p.svg", tmp_path / "op.txt"
    code = main(["evolve", "--config", str(config), "--out", str(out), "--svg", str(svg),
                 "--seed", "7", "--dump-operator", str(dump)])
    assert code == 0
    assert _header(out) == ["t", "row_index", "phi"]
    assert svg.exists() and dump.read_text().startswith("#")


def test_mse(tmp_path, config):
    out = tmp_path / "m.csv"
    code = main(["--threads", "2", "mse", "--config", str(config), "--instances", "2",
                 "--out", str(out), "--trajectories", str(tmp_path / "traj")])
    assert code in (0, 3)
    assert _header(out) == ["t", "mse_amp_mean", "mse_amp_stderr", "mse_se"]
    assert _header(tmp_path / "traj" / "instance_0000.csv") == ["t", "mse_amp"]


def test_phase(tmp_path, config):
    out, fit = tmp_path / "ph.csv", tmp_path / "fit.json"
    code = main(["phase", "--config", str(config), "--scheme", "II", "--epsilon", "0.2",
                 "--delta-grid", "0.5:0.6:0.1", "--instances", "2", "--out", str(out),
                 "--fit", str(fit), "--threads", "2"])
    assert code in (0, 3)
    assert _header(out) == ["epsilon", "delta", "instances", "successes", "success_rate"]
    assert set(json.loads(fit.read_text())) == {"epsilon", "delta_c", "beta", "ci_low", "ci_high", "flags"}


def test_threshold(tmp_path, capsys):
    out = tmp_path / "th.csv"
    assert main(["threshold", "--epsilon", "0.1,0.2", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "epsilon,delta_tilde,s_star" and len(lines) == 3
    assert out.read_text().splitlines() == lines


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 200, "extra": 1}))
    assert main(["evolve", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert "unknown config keys" in capsys.readouterr().err
    assert main(["threshold", "--epsilon", "1.5"]) == 2
    assert main(["--threads", "0", "threshold", "--epsilon", "0.2"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["evolve", "--out", "x.csv", "--seed", "-1"])
    assert exc.value.code == 2


def test_divergence_exit_code(tmp_path):
    # the literal coupled AMP diverges in every instance at this size
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(dict(n=1000, m1=20, L=3, ell=160, delta=0.15, sigma=1e-3,
                                   epsilon=0.1, t_max=60)))
    code = main(["mse", "--config", str(cfg), "--instances", "2", "--out", str(tmp_path / "m.csv")])
    assert code == 3
