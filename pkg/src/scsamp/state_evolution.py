"""State evolution: coupled and scalar recursions, predicted MSE, thresholds.

Profile indexing: ``profiles[0]`` is the no-information profile
sigma^2 + sum_i W_ai mse(0); it is the predicted variance of the first AMP
residual r^1 = y - A_F xhat^1. In general profiles[k] pairs with r^{k+1}, and
the predicted MSE of xhat^{t} is mean_i mse(s_i(profiles[t-2])) for t >= 2,
mse(0) = epsilon for t = 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .denoisers import (
    S_MAX,
    S_MIN,
    BernoulliGaussianPrior,
    clamp_s,
    posterior_mse,
    posterior_mse_fast,
    soft_threshold_risk,
)

PHI_FLOOR = 1e-12


@dataclass
class SeProfile:
    phi: np.ndarray
    t: int


@dataclass(frozen=True)
class ThresholdResult:
    epsilon: float
    delta_tilde: float
    s_star: float
    info_dim: float
    multimodal: bool = False


@dataclass
class IidSeResult:
    phi: np.ndarray
    converged_at: int | None

    @property
    def limit(self) -> float:
        return float(self.phi[-1])


def effective_snr(phi: np.ndarray, W: np.ndarray) -> np.ndarray:
    """s_i = sum_a W_ai / phi_a, clamped to [S_MIN, S_MAX]."""
    return clamp_s(W.T @ (1.0 / phi))


def se_sc_step(phi, W, sigma, prior, phi_floor=PHI_FLOOR):
    """phi_a <- sigma^2 + sum_i W_ai mse(sum_b W_bi / phi_b)."""
    s = effective_snr(phi, W)
    return np.maximum(sigma**2 + W @ posterior_mse_fast(s, prior), phi_floor)


def no_information_profile(W, sigma, prior):
    return sigma**2 + W.sum(axis=1) * prior.second_moment


def _converged(new, old, rtol=1e-12):
    return np.max(np.abs(new - old)) < rtol * max(1.0, float(np.max(old)))


def se_sc_run(W, sigma, prior, t_max, phi_floor=PHI_FLOOR, stop_at_fixed_point=True):
    """Coupled recursion from the no-information profile; returns the list of profiles.

    ``W`` may be an operator (anything with a ``W`` attribute) or the weight matrix.
    The run stops early once the profile is a fixed point.
    """
    W = getattr(W, "W", W)
    phi = np.maximum(no_information_profile(W, sigma, prior), phi_floor)
    profiles = [phi]
    for _ in range(t_max):
        new = se_sc_step(phi, W, sigma, prior, phi_floor)
        profiles.append(new)
        if stop_at_fixed_point and _converged(new, phi):
            break
        phi = new
    return profiles


def mse_se_prediction(phi, W, prior, exact=True):
    """(1/n) sum_i mse(sum_a W_ai / phi_a): predicted MSE of the estimate built from ``phi``."""
    W = getattr(W, "W", W)
    s = effective_snr(phi, W)
    mse = posterior_mse(s, prior) if exact else posterior_mse_fast(s, prior)
    return float(np.mean(mse))


def predicted_mse_curve(profiles, W, prior, t_max):
    """Predicted MSE of xhat^t for t = 1..t_max, holding the last profile once the run has converged."""
    W = getattr(W, "W", W)
    out = np.empty(t_max)
    out[0] = prior.second_moment
    last = len(profiles) - 1
    for t in range(2, min(t_max, last + 2) + 1):
        out[t - 1] = mse_se_prediction(profiles[t - 2], W, prior)
    # beyond the end of the run the final profile is held
    if t_max > last + 2:
        out[last + 2:] = out[last + 1]
    return out


# --- scalar (uncoupled) recursion ------------------------------------------

def iid_pe_map(phi, delta, prior, sigma=0.0):
    """phi -> sigma^2 + mse(1/phi) / delta."""
    phi = np.asarray(phi, dtype=float)
    return sigma**2 + posterior_mse(1.0 / phi, prior) / delta


def se_iid_run(delta, sigma, prior, t_max, phi_floor=PHI_FLOOR, rtol=1e-12):
    """phi_{t+1} = sigma^2 + mse(1/phi_t)/delta from phi_0 = sigma^2 + E|X|^2/delta."""
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    phi = [max(sigma**2 + prior.second_moment / delta, phi_floor)]
    converged = None
    for t in range(t_max):
        new = max(float(iid_pe_map(phi[-1], delta, prior, sigma)), phi_floor)
        phi.append(new)
        if abs(new - phi[-2]) < rtol * max(1.0, phi[-2]):
            converged = t + 1
            break
    return IidSeResult(np.array(phi), converged)


def _sup_on_log_grid(f, lo, hi, points=200):
    """Coarse log-grid scan then bounded refinement of max f(s); returns (value, argmax, multimodal)."""
    grid = np.logspace(np.log10(lo), np.log10(hi), points)
    vals = f(grid)
    k = int(np.argmax(vals))
    interior = vals[1:-1]
    peaks = np.sum((interior > vals[:-2]) & (interior > vals[2:]))
    if k in (0, points - 1):
        return float(vals[k]), float(grid[k]), bool(peaks > 1)
    res = minimize_scalar(
        lambda u: -float(f(np.exp(u))),
        bounds=(np.log(grid[k - 1]), np.log(grid[k + 1])),
        method="bounded",
        options={"xatol": 1e-9},
    )
    return float(-res.fun), float(np.exp(res.x)), bool(peaks > 1)


def renyi_threshold(epsilon: float) -> ThresholdResult:
    """delta_tilde(eps) = sup_s s * mse(s) over s in [1e-4, 1e6]."""
    prior = BernoulliGaussianPrior(epsilon)
    value, s_star, multi = _sup_on_log_grid(lambda s: s * posterior_mse(s, prior), 1e-4, 1e6)
    return ThresholdResult(epsilon, value, s_star, epsilon, multi)


# --- soft thresholding -----------------------------------------------------

def se_camp_step(phi, W, prior, alpha, phi_floor=PHI_FLOOR):
    """phi_a <- sum_i W_ai E|eta_ST(X + s_i^{-1/2} Z; alpha s_i^{-1/2}) - X|^2 (no noise term)."""
    s = effective_snr(phi, W)
    return np.maximum(W @ soft_threshold_risk(s, alpha, prior), phi_floor)


def se_camp_run(W, prior, alpha, t_max, phi_floor=PHI_FLOOR, stop_at_fixed_point=True):
    """Soft-threshold coupled recursion from the zero estimate (phi_a = E|X|^2 row sums)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    W = getattr(W, "W", W)
    phi = np.maximum(W.sum(axis=1) * prior.second_moment, phi_floor)
    profiles = [phi]
    for _ in range(t_max):
        new = se_camp_step(phi, W, prior, alpha, phi_floor)
        profiles.append(new)
        if stop_at_fixed_point and _converged(new, phi):
            break
        phi = new
    return profiles


def predicted_camp_mse_curve(profiles, W, prior, alpha, t_max):
    W = getattr(W, "W", W)
    out = np.empty(t_max)
    out[0] = prior.second_moment
    for t in range(2, t_max + 1):
        s = effective_snr(profiles[min(t - 2, len(profiles) - 1)], W)
        out[t - 1] = float(np.mean(soft_threshold_risk(s, alpha, prior)))
    return out


def iid_st_map(phi, delta, prior, alpha):
    phi = np.asarray(phi, dtype=float)
    return soft_threshold_risk(1.0 / phi, alpha, prior) / delta


def soft_threshold_boundary(epsilon: float, alpha: float) -> float:
    """Smallest delta at which the uncoupled soft-threshold SE contracts to 0: sup_s s * risk(s)."""
    prior = BernoulliGaussianPrior(epsilon)
    value, _, _ = _sup_on_log_grid(lambda s: s * soft_threshold_risk(s, alpha, prior), 1e-4, 1e6)
    return value


def tune_alpha(epsilon: float, bracket=(0.05, 3.0)) -> tuple[float, float]:
    """alpha* minimising the soft-threshold boundary; returns (alpha*, boundary)."""
    res = minimize_scalar(lambda a: soft_threshold_boundary(epsilon, a), bounds=bracket,
                          method="bounded", options={"xatol": 1e-6})
    return float(res.x), float(res.fun)


# --- fixed points of scalar maps ---------------------------------------------

@dataclass(frozen=True)
class FixedPoint:
    phi: float
    stable: bool


def scalar_fixed_points(phi_map, lo=1e-10, hi=10.0, points=4000, include_origin=True):
    """Bracket the fixed points of ``phi_map`` by sign changes of phi - map(phi) on a log grid.

    A crossing from - to + (moving up in phi) is stable. When ``include_origin``
    is set and phi - map(phi) > 0 at the bottom of the grid, the origin counts
    as a stable fixed point.
    """
    grid = np.logspace(np.log10(lo), np.log10(hi), points)
    gap = grid - phi_map(grid)
    out = []
    if include_origin and gap[0] > 0:
        out.append(FixedPoint(0.0, True))
    sign = np.sign(gap)
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        # linear interpolation in log phi for the location
        g0, g1 = gap[i], gap[i + 1]
        loc = np.exp(np.log(grid[i]) + (np.log(grid[i + 1]) - np.log(grid[i])) * g0 / (g0 - g1))
        out.append(FixedPoint(float(loc), bool(g0 < 0 < g1)))
    return out


def count_stable_fixed_points(phi_map, **kw) -> int:
    return sum(fp.stable for fp in scalar_fixed_points(phi_map, **kw))


__all__ = [
    "PHI_FLOOR", "S_MIN", "S_MAX", "SeProfile", "ThresholdResult", "IidSeResult",
    "effective_snr", "se_sc_step", "se_sc_run", "mse_se_prediction", "predicted_mse_curve",
    "iid_pe_map", "se_iid_run", "renyi_threshold", "se_camp_step", "se_camp_run",
    "predicted_camp_mse_curve", "iid_st_map", "soft_threshold_boundary", "tune_alpha",
    "scalar_fixed_points", "count_stable_fixed_points", "FixedPoint", "no_information_profile",
]
