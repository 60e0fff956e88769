"""Scalar complex channel Y = X + s^{-1/2} Z with a Bernoulli-Gaussian prior.

Z is standard circularly-symmetric complex normal (E|Z|^2 = 1). Everything here
is vectorised over numpy arrays; scalars go through the same code path.

Two MSE conventions exist for this channel:

* ``mmse(s)`` carries the factor 1/2, i.e. it is half of E|X - E[X|Y]|^2.
* ``posterior_mse(s)`` is the full complex squared error E|X - E[X|Y]|^2.

State evolution and all AMP/SE comparisons use ``posterior_mse``; running AMP
against both conventions shows that the full error is the one that tracks
the empirical MSE (see ``tests/test_calibration.py``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc, expit

S_MIN = 1e-12
S_MAX = 1e12
LOG_ODDS_CLAMP = 700.0


@dataclass(frozen=True)
class BernoulliGaussianPrior:
    """p = (1 - epsilon) delta_0 + epsilon CN(0, 1).

    ``epsilon`` may sit on the boundary {0, 1} for degenerate checks; the
    sparse regime is 0 < epsilon < 1.
    """

    epsilon: float

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0) or not np.isfinite(self.epsilon):
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def second_moment(self) -> float:
        return self.epsilon


@dataclass(frozen=True)
class ChannelPoint:
    v: complex
    s: float

    def __post_init__(self):
        if not (self.s >= 0 and np.isfinite(self.s)):
            raise ValueError(f"s must be finite and nonnegative, got {self.s}")


@dataclass(frozen=True)
class DenoiserEval:
    value: complex | np.ndarray
    d_v: complex | np.ndarray
    d_vbar: complex | np.ndarray


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian draws, E|z|^2 = 1."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def sample_signal(n: int, prior: BernoulliGaussianPrior, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    support = rng.random(n) < prior.epsilon
    return np.where(support, complex_normal(rng, n), 0.0 + 0.0j)


def clamp_s(s):
    return np.clip(s, S_MIN, S_MAX)


def _log_odds(q, s, epsilon):
    # log of eps*g_{1+1/s}(v) / ((1-eps)*g_{1/s}(v)) as a function of q = |v|^2
    with np.errstate(divide="ignore"):
        c0 = np.log(epsilon) - np.log1p(-epsilon) - np.log1p(s)
    kappa = s * s / (1.0 + s)
    return np.clip(c0 + kappa * q, -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP)


def posterior_mean(v, s, prior: BernoulliGaussianPrior):
    """E[X | X + s^{-1/2} Z = v]; s = 0 gives the prior mean 0."""
    return posterior_mean_derivs(v, s, prior).value


def posterior_mean_derivs(v, s, prior: BernoulliGaussianPrior) -> DenoiserEval:
    """Posterior mean and its Wirtinger pair (d/dv, d/dvbar).

    With q = v vbar, the denoiser is eta = c pi(q) v where c = s/(1+s) and
    pi is the posterior probability of the Gaussian component, a logistic
    function of q with slope kappa = s^2/(1+s). Hence
    d eta/dv = c (pi + kappa pi (1-pi) q) and d eta/dvbar = c kappa pi (1-pi) v^2.
    """
    v = np.asarray(v, dtype=complex)
    s = np.asarray(s, dtype=float)
    eps = prior.epsilon
    q = (v * v.conj()).real
    c = s / (1.0 + s)
    kappa = s * s / (1.0 + s)
    if eps >= 1.0:
        pi = np.ones_like(q)
        pi1 = np.zeros_like(q)
    elif eps <= 0.0:
        pi = np.zeros_like(q)
        pi1 = np.zeros_like(q)
    else:
        lo = _log_odds(q, s, eps)
        pi = expit(lo)
        pi1 = pi * expit(-lo)
    value = c * pi * v
    d_v = c * (pi + kappa * pi1 * q) + 0j
    d_vbar = c * kappa * pi1 * v * v
    return DenoiserEval(value, d_v, d_vbar)


def soft_threshold(z, theta):
    """(1 - theta/|z|)_+ z, applied entrywise."""
    return soft_threshold_derivs(z, theta).value


def soft_threshold_derivs(z, theta) -> DenoiserEval:
    """Complex soft thresholding and its Wirtinger pair.

    Outside the dead zone d/dz = 1 - theta/(2|z|) and d/dzbar = theta z^2 / (2|z|^3).
    The map is not differentiable on |z| = theta; that circle takes the
    dead-zone (all zero) branch.
    """
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be nonnegative")
    mag = np.abs(z)
    # theta = 0 is the identity everywhere, including z = 0
    live = (mag > theta) | (theta == 0)
    safe = np.where(mag > 0, mag, 1.0)
    unit = np.exp(1j * np.angle(z))
    # the dead-zone branch may overflow for subnormal |z|; it is masked out
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        shrink = np.where(live, 1.0 - theta / safe, 0.0)
        d_z = np.where(live, 1.0 - theta / (2.0 * safe), 0.0) + 0j
        d_zbar = np.where(live, theta * unit * unit / (2.0 * safe), 0.0 + 0.0j)
    value = shrink * z
    return DenoiserEval(value, d_z, d_zbar)


# --- mmse by quadrature ---------------------------------------------------
#
# With z = kappa |Y|^2 the posterior weight is pi = expit(c0 + z), and
#   Var(X | Y) = (pi + pi (1 - pi) z) / (1 + s).
# Under the Gaussian component z ~ Exp(mean s), under the atom z ~ Exp(mean s/(1+s)).
# Each expectation E_{Exp(mu)} g(z) = int_0^inf g(mu u) e^{-u} du is done by
# composite Gauss-Legendre in u with breakpoints at the density scale and
# around the logistic transition u0 = -c0/mu (width 1/mu).

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_U_MAX = 60.0
_DENSITY_BREAKS = np.array([0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0,
                            16.0, 24.0, 32.0, 45.0, _U_MAX])
_LOGISTIC_OFFSETS = np.array([-40.0, -20.0, -10.0, -6.0, -3.0, -1.5, 0.0,
                              1.5, 3.0, 6.0, 10.0, 20.0, 40.0])


def _exp_expectation(g, mu, c0):
    """E g(z) for z ~ Exp(mean mu), vectorised over mu (1-D) and c0 (same shape)."""
    u0 = -c0 / mu
    breaks = np.concatenate(
        [np.broadcast_to(_DENSITY_BREAKS, (mu.size, _DENSITY_BREAKS.size)),
         u0[:, None] + _LOGISTIC_OFFSETS[None, :] / mu[:, None]],
        axis=1,
    )
    breaks = np.sort(np.clip(breaks, 0.0, _U_MAX), axis=1)
    a, b = breaks[:, :-1], breaks[:, 1:]
    half = 0.5 * (b - a)
    u = a[..., None] + half[..., None] * (_GL_NODES + 1.0)
    w = half[..., None] * _GL_WEIGHTS * np.exp(-u)
    vals = g(mu[:, None, None] * u, c0[:, None, None])
    return np.einsum("ijk,ijk->i", w, vals)


def _conditional_variance_kernel(z, c0):
    lo = np.clip(c0 + z, -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP)
    pi = expit(lo)
    return pi + pi * expit(-lo) * z


def posterior_mse(s, prior: BernoulliGaussianPrior):
    """Full complex MSE E|X - E[X|Y]|^2 of the posterior mean at SNR s (s >= 0)."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0) or np.any(np.isnan(s_arr)):
        raise ValueError("s must be nonnegative")
    eps = prior.epsilon
    out = np.empty_like(s_arr)
    zero = s_arr == 0.0
    inf = np.isinf(s_arr)
    out[zero] = eps
    out[inf] = 0.0
    live = ~(zero | inf)
    if np.any(live):
        sl = s_arr[live]
        if eps >= 1.0:
            out[live] = 1.0 / (1.0 + sl)
        elif eps <= 0.0:
            out[live] = 0.0
        else:
            c0 = np.log(eps) - np.log1p(-eps) - np.log1p(sl)
            sig = _exp_expectation(_conditional_variance_kernel, sl, c0)
            noise = _exp_expectation(_conditional_variance_kernel, sl / (1.0 + sl), c0)
            out[live] = (eps * sig + (1.0 - eps) * noise) / (1.0 + sl)
    return out if np.ndim(s) else float(out[0])


def mmse(s, prior: BernoulliGaussianPrior):
    """Half-MSE (1/2) E|X - E[X|Y]|^2, the literal factor-1/2 convention."""
    return 0.5 * posterior_mse(s, prior)


@lru_cache(maxsize=64)
def _mse_table(epsilon: float):
    from scipy.interpolate import CubicSpline

    log_s = np.linspace(np.log(S_MIN), np.log(S_MAX), 4001)
    vals = posterior_mse(np.exp(log_s), BernoulliGaussianPrior(epsilon))
    # log-log is smooth on both asymptotes (mse -> eps and mse ~ eps/s)
    return CubicSpline(log_s, np.log(vals))


def posterior_mse_fast(s, prior: BernoulliGaussianPrior):
    """Spline-tabulated ``posterior_mse`` for inner SE loops; s clamped to [S_MIN, S_MAX].

    Relative error against the direct quadrature is below 1e-9 on the clamp range.
    """
    eps = prior.epsilon
    s = clamp_s(np.asarray(s, dtype=float))
    if eps >= 1.0:
        return 1.0 / (1.0 + s)
    if eps <= 0.0:
        return np.zeros_like(s)
    return np.exp(_mse_table(float(eps))(np.log(s)))


def mmse_mc(s: float, prior: BernoulliGaussianPrior, rng: np.random.Generator,
            n_samples: int = 10**6) -> tuple[float, float]:
    """Monte Carlo estimate of ``mmse(s)`` (half convention) and its standard error."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    x = sample_signal(n_samples, prior, rng)
    if s == 0:
        est = np.zeros_like(x)
    else:
        y = x + complex_normal(rng, n_samples) / np.sqrt(s)
        est = posterior_mean(y, s, prior)
    err = 0.5 * np.abs(x - est) ** 2
    return float(err.mean()), float(err.std(ddof=1) / np.sqrt(n_samples))


# --- soft thresholding risk ----------------------------------------------

def _rayleigh_tail_moments(a):
    """int_a^inf g^k 2g e^{-g^2} dg for k = 0, 1, 2."""
    ea = np.exp(-a * a)
    t0 = ea
    t1 = a * ea + 0.5 * np.sqrt(np.pi) * erfc(a)
    t2 = (a * a + 1.0) * ea
    return t0, t1, t2


def soft_threshold_risk(s, alpha: float, prior: BernoulliGaussianPrior):
    """E|eta_ST(X + s^{-1/2} Z; alpha s^{-1/2}) - X|^2 in closed form.

    Splits the prior into the atom at zero and the CN(0,1) component; both
    reduce to Rayleigh tail moments of |Y|.
    """
    s = np.asarray(s, dtype=float)
    eps = prior.epsilon
    if np.isinf(alpha):
        return np.full_like(s, eps)[()]
    with np.errstate(divide="ignore"):
        tau2 = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), np.inf)
    finite = np.isfinite(tau2)
    tau2f = np.where(finite, tau2, 1.0)

    # atom at zero: tau^2 E(|Z| - alpha)_+^2
    atom = tau2f * (np.exp(-alpha * alpha) - alpha * np.sqrt(np.pi) * erfc(alpha))

    # Gaussian component: Y ~ CN(0, S2), X | Y ~ CN(c Y, c tau^2), c = 1/(1 + tau^2)
    s2 = 1.0 + tau2f
    c = 1.0 / s2
    scale = np.sqrt(s2)
    theta = alpha * np.sqrt(tau2f)
    a = theta / scale
    t0, t1, t2 = _rayleigh_tail_moments(a)
    below = c * c * s2 * (1.0 - t2)
    above = (1.0 - c) ** 2 * s2 * t2 - 2.0 * (1.0 - c) * theta * scale * t1 + theta**2 * t0
    gauss = c * tau2f + below + above

    risk = eps * gauss + (1.0 - eps) * atom
    # s = 0: the threshold and the noise both blow up, risk is unbounded
    return np.where(finite, risk, np.inf)[()]
