import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scsamp.denoisers import BernoulliGaussianPrior, posterior_mse, soft_threshold_risk
from scsamp.ensemble import EnsembleParams, coupled_weights
from scsamp.state_evolution import (
    count_stable_fixed_points,
    effective_snr,
    iid_pe_map,
    iid_st_map,
    mse_se_prediction,
    no_information_profile,
    predicted_mse_curve,
    renyi_threshold,
    scalar_fixed_points,
    se_camp_run,
    se_iid_run,
    se_sc_run,
    se_sc_step,
    soft_threshold_boundary,
    tune_alpha,
)

DESK = EnsembleParams(1000, 20, 3, 160, 0.5, 0.15, 1e-3)

# sup_s s mse(s), frozen from this implementation and cross-checked below on a dense grid
FROZEN_DELTA_TILDE = {0.1: 0.1691656456474496, 0.2: 0.29742913318502695, 0.3: 0.4106044192634323}


@pytest.fixture(scope="module")
def desk_W():
    return coupled_weights(DESK)


@pytest.fixture(scope="module")
def desk_profiles(desk_W):
    return se_sc_run(desk_W, 1e-3, BernoulliGaussianPrior(0.1), 4 * DESK.m)


def test_no_information_step(desk_W):
    prior = BernoulliGaussianPrior(0.1)
    huge = np.full(desk_W.shape[0], 1e30)
    # full-MSE convention: mse(0) = eps, rows have unit norm
    assert np.allclose(se_sc_step(huge, desk_W, 1e-3, prior), 1e-6 + 0.1, rtol=1e-9)
    assert np.allclose(no_information_profile(desk_W, 1e-3, prior), 1e-6 + 0.1)


def test_perfect_recovery_fixed_point(desk_W):
    tiny = np.full(desk_W.shape[0], 1e-12)
    out = se_sc_step(tiny, desk_W, 0.0, BernoulliGaussianPrior(0.1))
    assert np.all(out < 1e-10)


def test_profile_monotone_and_floor(desk_profiles):
    for a, b in zip(desk_profiles, desk_profiles[1:]):
        assert np.all(b <= a * (1 + 1e-12))
    assert np.all(desk_profiles[-1] >= 1e-6)


def test_desk_wave(desk_profiles):
    sigma2 = 1e-6
    seed = slice(0, 60)
    assert np.all(desk_profiles[10][seed] < 100 * sigma2)
    assert np.all(desk_profiles[-1] < 100 * sigma2)
    # the recovered set grows steadily in the bulk
    counts = np.array([np.sum(p[60:] < 100 * sigma2) for p in desk_profiles])
    window = np.flatnonzero((counts > 0.1 * 150) & (counts < 0.9 * 150))
    slope, intercept = np.polyfit(window, counts[window], 1)
    resid = counts[window] - (slope * window + intercept)
    r2 = 1 - resid.var() / counts[window].var()
    assert slope > 0 and r2 > 0.9


def test_fixed_point_reached(desk_profiles, desk_W):
    last = desk_profiles[-1]
    nxt = se_sc_step(last, desk_W, 1e-3, BernoulliGaussianPrior(0.1))
    assert np.max(np.abs(nxt - last)) < 1e-10


def test_stall_below_information_limit():
    p = EnsembleParams(1000, 20, 3, 160, 0.5, 0.05, 1e-3)
    profiles = se_sc_run(coupled_weights(p), 1e-3, BernoulliGaussianPrior(0.1), 4 * p.m)
    assert profiles[-1].max() > 1e3 * 1e-6


def test_permutation_equivariance(desk_W):
    prior = BernoulliGaussianPrior(0.1)
    perm = np.random.default_rng(0).permutation(desk_W.shape[0])
    a = se_sc_run(desk_W, 1e-3, prior, 40, stop_at_fixed_point=False)[-1]
    b = se_sc_run(desk_W[perm], 1e-3, prior, 40, stop_at_fixed_point=False)[-1]
    assert np.allclose(np.sort(a), np.sort(b), rtol=1e-12)


def test_prediction_limits(desk_W):
    prior = BernoulliGaussianPrior(0.1)
    m = desk_W.shape[0]
    assert mse_se_prediction(np.full(m, 1e30), desk_W, prior) == pytest.approx(0.1, rel=1e-9)
    assert mse_se_prediction(np.full(m, 1e-12), desk_W, prior) < 1e-9


def test_predicted_curve_indexing(desk_profiles, desk_W):
    prior = BernoulliGaussianPrior(0.1)
    curve = predicted_mse_curve(desk_profiles, desk_W, prior, len(desk_profiles) + 20)
    assert curve[0] == 0.1
    assert curve[1] == pytest.approx(mse_se_prediction(desk_profiles[0], desk_W, prior))
    assert curve[-1] == curve[len(desk_profiles)]


def test_effective_snr_clamped():
    W = np.ones((2, 3)) / 3
    assert np.all(effective_snr(np.array([1e300, 1e300]), W) == 1e-12)


@given(phi=st.floats(1e-6, 1e3), delta=st.floats(0.3, 1.0))
def test_gaussian_iid_map_closed_form(phi, delta):
    prior = BernoulliGaussianPrior(1.0)
    assert iid_pe_map(phi, delta, prior) == pytest.approx(phi / (delta * (1 + phi)), rel=1e-12)


def test_iid_run_gaussian():
    res = se_iid_run(0.9, 0.0, BernoulliGaussianPrior(1.0), 1000)
    # slope of phi/(delta(1+phi)) at 0 is 1/delta > 1: no recovery
    assert res.limit > 0.1
    assert se_iid_run(0.5, 0.0, BernoulliGaussianPrior(0.1), 2000).limit < 1e-10
    with pytest.raises(ValueError):
        se_iid_run(0.0, 0.0, BernoulliGaussianPrior(0.1), 10)


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
def test_iid_threshold_behaviour(eps):
    prior = BernoulliGaussianPrior(eps)
    dt = renyi_threshold(eps).delta_tilde
    assert se_iid_run(dt + 0.02, 1e-3, prior, 5000).limit <= 10 * 1e-6
    assert se_iid_run(dt - 0.02, 0.0, prior, 5000).limit > 1e-3


def test_iid_limit_monotone_in_delta():
    prior = BernoulliGaussianPrior(0.2)
    limits = [se_iid_run(d, 1e-3, prior, 3000).limit for d in np.arange(0.2, 0.5, 0.02)]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(limits, limits[1:]))


@pytest.mark.parametrize("eps", sorted(FROZEN_DELTA_TILDE))
def test_renyi_threshold_frozen(eps):
    assert renyi_threshold(eps).delta_tilde == pytest.approx(FROZEN_DELTA_TILDE[eps], rel=1e-9)


def test_renyi_threshold_dense_grid():
    prior = BernoulliGaussianPrior(0.2)
    s = np.logspace(-1, 3, 40001)
    brute = np.max(s * posterior_mse(s, prior))
    res = renyi_threshold(0.2)
    assert abs(res.delta_tilde - brute) < 1e-6
    assert 1 < res.s_star < 100 and not res.multimodal


def test_renyi_threshold_limits():
    assert renyi_threshold(0.999999).delta_tilde == pytest.approx(1.0, abs=1e-3)
    assert renyi_threshold(1e-4).delta_tilde < 0.01
    for eps in (0.1, 0.2, 0.3, 0.4, 0.5):
        res = renyi_threshold(eps)
        assert res.delta_tilde > eps and res.info_dim == eps


def test_fixed_point_structure():
    eps = 0.2
    prior = BernoulliGaussianPrior(eps)
    dt = renyi_threshold(eps).delta_tilde
    delta = 0.5 * (eps + dt)
    fps = scalar_fixed_points(lambda p: iid_pe_map(p, delta, prior))
    assert sum(f.stable for f in fps) == 2
    assert fps[0].phi == 0.0
    alpha = tune_alpha(eps)[0]
    assert count_stable_fixed_points(lambda p: iid_st_map(p, delta, prior, alpha)) == 1


def test_fixed_points_above_threshold_single():
    prior = BernoulliGaussianPrior(0.2)
    assert count_stable_fixed_points(lambda p: iid_pe_map(p, 0.5, prior)) == 1


def test_camp_infinite_threshold_flat(desk_W):
    prior = BernoulliGaussianPrior(0.1)
    profiles = se_camp_run(desk_W, prior, 1e12, 5)
    assert np.allclose(profiles[-1], 0.1, rtol=1e-9)
    with pytest.raises(ValueError):
        se_camp_run(desk_W, prior, 0.0, 5)


def test_soft_threshold_boundary_above_renyi():
    for eps in (0.1, 0.2, 0.3):
        alpha, boundary = tune_alpha(eps)
        assert boundary > renyi_threshold(eps).delta_tilde
        assert boundary == pytest.approx(soft_threshold_boundary(eps, alpha))
        # alpha* is interior to the search bracket
        assert 0.06 < alpha < 2.9


def test_soft_threshold_boundary_brute():
    # the boundary is sup_s s * risk(s), checked on a dense grid
    prior = BernoulliGaussianPrior(0.2)
    s = np.logspace(-4, 6, 20001)
    assert soft_threshold_boundary(0.2, 1.0) == pytest.approx(
        np.max(s * soft_threshold_risk(s, 1.0, prior)), rel=1e-6)
