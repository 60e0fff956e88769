import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit

from scsamp.experiments import (
    ConfigError,
    ExperimentConfig,
    InstanceResult,
    MseComparison,
    PhaseSweepResult,
    _hold,
    fit_logit,
    mse_decay_report,
    parse_grid,
    recorded_iterations,
    run_instance,
    run_jobs,
    run_mse_comparison,
    run_phase_sweep,
    run_profile_experiment,
    seed_plan,
    success_monotone,
    write_csv,
    write_fit_json,
)

SMALL = dict(n=200, m1=4, L=2, ell=30, xi=0.5, delta=0.3, sigma=1e-2, epsilon=0.1, t_max=30)


def test_config_defaults_and_keys():
    cfg = ExperimentConfig()
    assert cfg.horizon(170) == 680
    assert cfg.threshold_for(0.2) == pytest.approx(2e-5)
    with pytest.raises(ConfigError, match="unknown config keys: bogus"):
        ExperimentConfig.from_dict({"bogus": 1})


@pytest.mark.parametrize("bad", [
    {"n": 10.5}, {"scheme": "IV"}, {"instances": 0}, {"epsilon": 1.5}, {"seed": -1},
    {"seed": 2**64}, {"delta_grid": "0.3:0.1:0.01"}, {"delta": 1.2}, {"epsilon_list": []},
    {"success_threshold": 0.0}, {"record_every": 0}, {"t_max": 0}, {"n": True},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_from_json(tmp_path):
    good = tmp_path / "c.json"
    good.write_text(json.dumps({"n": 800, "seed": 2**64 - 1}))
    assert ExperimentConfig.from_json(good).n == 800
    for text in ("[1, 2]", "{not json"):
        bad = tmp_path / "b.json"
        bad.write_text(text)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(tmp_path / "missing.json")


def test_parse_grid():
    g = parse_grid("0.18:0.32:0.01")
    assert len(g) == 15 and g[0] == 0.18 and g[-1] == 0.32
    assert list(parse_grid("1:1:0.5")) == [1.0]
    for bad in ("0.1:0.2", "a:b:c", "0.1:0.2:0", "0.2:0.1:0.01"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_seed_plan_distinct():
    seeds = {seed_plan(0, "mse", i) for i in range(10**6)}
    assert len(seeds) == 10**6
    assert seed_plan(0, "a", 0) != seed_plan(0, "b", 0)
    assert seed_plan(1, "a", 0) != seed_plan(0, "a", 0)


@given(master=st.integers(0, 2**64 - 1), i=st.integers(0, 2**32))
def test_seed_plan_deterministic_u64(master, i):
    s = seed_plan(master, "phase/I/0.2/0.25", i)
    assert s == seed_plan(master, "phase/I/0.2/0.25", i)
    assert 0 <= s < 2**64


def test_run_jobs_preserves_order():
    args = [(b, 3) for b in range(20)]
    assert run_jobs(pow, args, 1) == run_jobs(pow, args, 4) == [b**3 for b in range(20)]


def test_recorded_iterations():
    assert recorded_iterations(23, 10) == [0, 1, 5, 10, 20, 23]
    assert recorded_iterations(3, 1) == [0, 1, 2, 3]


def test_hold_after_stagnation():
    res = InstanceResult([1, 2, 5], [1.0, 0.5, 0.1], False)
    assert list(_hold(res, np.array([1, 2, 3, 4, 5, 9]))) == [1.0, 0.5, 0.5, 0.5, 0.1, 0.1]


def _synthetic(delta_c, beta, grid, m, rng):
    p = expit((grid - delta_c) / beta)
    return list(zip(grid.tolist(), rng.binomial(m, p).tolist(), [m] * len(grid)))


def test_fit_logit_recovers_threshold(rng):
    grid = np.round(np.arange(0.18, 0.3201, 0.01), 12)
    hits = []
    for _ in range(20):
        fit = fit_logit(_synthetic(0.25, 0.01, grid, 100, rng))
        assert fit.ci_low < fit.delta_c < fit.ci_high
        hits.append(abs(fit.delta_c - 0.25) < 0.005)
        assert fit.beta == pytest.approx(0.01, rel=0.3)
    assert all(hits)


def test_fit_logit_ci_coverage(rng):
    grid = np.round(np.arange(0.18, 0.3201, 0.01), 12)
    covered = 0
    for _ in range(200):
        fit = fit_logit(_synthetic(0.25, 0.02, grid, 20, rng))
        covered += fit.ci_low <= 0.25 <= fit.ci_high
    assert covered >= 180


def test_fit_logit_edge_cases():
    sep = fit_logit([(0.1, 0, 5), (0.2, 0, 5), (0.3, 5, 5)])
    assert sep.delta_c == pytest.approx(0.25) and "separated" in sep.flags
    assert (sep.ci_low, sep.ci_high) == (0.2, 0.3)
    fail = fit_logit([(0.1, 0, 5), (0.2, 0, 5)])
    assert "degenerate" in fail.flags and fail.delta_c == 0.2
    ok = fit_logit([(0.1, 5, 5), (0.2, 5, 5)])
    assert "degenerate" in ok.flags and ok.delta_c == 0.1
    single = fit_logit([(0.1, 0, 5), (0.2, 2, 5), (0.3, 5, 5)])
    assert "degenerate" in single.flags and 0.1 <= single.delta_c <= 0.3
    assert np.isfinite(single.ci_low) and np.isfinite(single.ci_high)
    with pytest.raises(ValueError):
        fit_logit([])
    with pytest.raises(ValueError):
        fit_logit([(0.1, 6, 5)])


def test_profile_experiment_rows():
    cfg = ExperimentConfig.from_dict(dict(SMALL, record_every=10))
    rows = run_profile_experiment(cfg)
    ts = sorted({r[0] for r in rows})
    assert ts[:3] == [0, 1, 5]
    m = cfg.ensemble().m
    assert len(rows) == len(ts) * m
    assert all(r[2] >= cfg.sigma**2 for r in rows)


def test_instance_is_seed_deterministic():
    params = ExperimentConfig.from_dict(SMALL).ensemble()
    a = run_instance("I", params, 0.1, 123, 10)
    b = run_instance("I", params, 0.1, 123, 10)
    assert a.mse == b.mse
    c = run_instance("I", params, 0.1, 124, 10)
    assert a.mse != c.mse


def test_single_instance_has_zero_stderr():
    cfg = ExperimentConfig.from_dict(dict(SMALL, instances=1, delta=0.6))
    res = run_mse_comparison(cfg)
    if res.diverged == 0:
        assert np.all(res.mse_amp_stderr == 0)
    assert res.mse_se[0] == pytest.approx(0.1)
    assert len(res.t) == 30


def test_phase_sweep_threads_identical(tmp_path):
    cfg = ExperimentConfig.from_dict(dict(SMALL, sigma=0.0, epsilon=0.2, instances=3,
                                          delta_grid="0.4:0.6:0.1", t_max=60))
    one = run_phase_sweep(cfg, scheme="II", threads=1)
    two = run_phase_sweep(cfg, scheme="II", threads=2)
    assert list(one.rows()) == list(two.rows())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(a, ["epsilon", "delta", "instances", "successes", "success_rate"], one.rows())
    write_csv(b, ["epsilon", "delta", "instances", "successes", "success_rate"], two.rows())
    assert a.read_bytes() == b.read_bytes()
    fit = tmp_path / "fit.json"
    write_fit_json(fit, one)
    data = json.loads(fit.read_text())
    assert set(data) == {"epsilon", "delta_c", "beta", "ci_low", "ci_high", "flags"}


def _comparison(mean, stderr):
    t = np.arange(1, len(mean) + 1)
    mean, stderr = np.asarray(mean, float), np.asarray(stderr, float)
    return MseComparison(t, mean, stderr, mean.copy(), 0, 5)


def test_mse_decay_report():
    decay = 0.1 * 0.8 ** np.arange(30)
    rep = mse_decay_report(_comparison(decay, 0.01 * decay))
    assert rep.monotone and rep.slope_log10 == pytest.approx(np.log10(0.8))
    bump = decay.copy()
    bump[10] *= 1.5
    assert not mse_decay_report(_comparison(bump, 0.01 * decay)).monotone
    # the same bump inside the error bars is tolerated
    assert mse_decay_report(_comparison(bump, 0.5 * decay)).monotone
    # upticks before the start iteration are ignored
    early = decay.copy()
    early[2] *= 3
    assert mse_decay_report(_comparison(early, 0.0 * decay)).monotone


def test_success_monotone():
    def sweep(k):
        m = np.full(len(k), 20)
        return PhaseSweepResult("II", 0.2, np.arange(len(k)) * 0.01, m, np.array(k), None)

    assert success_monotone(sweep([0, 2, 9, 15, 20, 20]))
    assert success_monotone(sweep([0, 3, 2, 10, 19, 20]))
    assert not success_monotone(sweep([0, 18, 2, 20]))
