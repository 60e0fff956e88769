"""Complex AMP reconstruction: spatially-coupled posterior-mean AMP (Scheme I),
uncoupled AMP on random Fourier rows (Scheme II) and coupled soft-threshold
CAMP (Scheme III).

The effective-noise profile phi is never estimated from the data; it comes
from a state-evolution pre-run and is consumed iteration by iteration.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .denoisers import (
    BernoulliGaussianPrior,
    DenoiserEval,
    clamp_s,
    posterior_mean_derivs,
    soft_threshold_derivs,
)
from .ensemble import SensingOperator


class AmpDivergence(RuntimeError):
    """Raised when an iterate becomes non-finite."""


@dataclass(frozen=True)
class AmpConfig:
    t_max: int = 200
    phi_floor: float = 1e-12
    success_threshold: float = 1e-5
    record_every: int = 1
    stagnation_window: int = 10
    stagnation_tol: float = 1e-12
    divergence_factor: float = 1e3
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.phi_floor <= 0:
            raise ValueError("phi_floor must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class AmpState:
    """Iterate xhat^t together with what the next residual update needs.

    ``r`` is r^{t-1}; ``onsager_w``/``onsager_a2`` are the per-column factors
    Q^{t-1}-weighted derivatives so that b^t = W @ onsager_w / phi and
    d^t = A2 @ onsager_a2 / phi (both zero before the first denoising).
    """

    xhat: np.ndarray
    r: np.ndarray
    t: int = 1
    phi: np.ndarray | None = None
    s: np.ndarray | None = None
    d_eta: np.ndarray | None = None
    d_eta_bar: np.ndarray | None = None


@dataclass
class Trajectory:
    t: list[int] = field(default_factory=list)
    mse: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    phis: list[np.ndarray] = field(default_factory=list)
    diverged: bool = False
    final_xhat: np.ndarray | None = None

    @property
    def final_mse(self) -> float:
        return self.mse[-1] if self.mse else float("nan")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mse_amp"])
            for t, m in zip(self.t, self.mse):
                w.writerow([t, repr(float(m))])


def initial_state(op: SensingOperator, prior: BernoulliGaussianPrior | None = None,
                  xhat: np.ndarray | None = None) -> AmpState:
    """xhat^1 = E X = 0 (or a supplied start), r^0 = 0, no Onsager memory."""
    x0 = np.zeros(op.n, dtype=complex) if xhat is None else np.asarray(xhat, dtype=complex).copy()
    return AmpState(xhat=x0, r=np.zeros(op.m, dtype=complex))


def mse_empirical(xhat_t, xhat_true) -> float:
    xhat_t, xhat_true = np.asarray(xhat_t), np.asarray(xhat_true)
    if xhat_t.shape != xhat_true.shape:
        raise ValueError("length mismatch")
    diff = xhat_t - xhat_true
    return float(np.vdot(diff, diff).real / diff.size)


def column_normalisation(phi: np.ndarray, W: np.ndarray) -> np.ndarray:
    """sum_a Q_ai W_ai for Q_ai = phi_a^{-1} / sum_b W_bi phi_b^{-1} (identically 1)."""
    inv = 1.0 / phi
    Q = inv[:, None] / (W.T @ inv)[None, :]
    return (Q * W).sum(axis=0)


def _check(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise AmpDivergence("non-finite iterate")


def _coupled_step(state: AmpState, op: SensingOperator, y: np.ndarray, phi: np.ndarray,
                  denoise: Callable[[np.ndarray, np.ndarray], DenoiserEval],
                  phi_floor: float = 1e-12) -> AmpState:
    if y.shape != (op.m,) or phi.shape != (op.m,) or state.xhat.shape != (op.n,):
        raise ValueError("dimension mismatch between state, operator, y and phi")
    A = op.freq_rows
    r = y - A @ state.xhat
    if state.d_eta is not None:
        # Q^{t-1}_ai = 1 / (phi_a s_i), so b_a = (1/phi_a) sum_i W_ai d_eta_i / s_i
        b = (op.W @ (state.d_eta / state.s)) / state.phi
        d = (op.A2 @ (state.d_eta_bar / state.s)) / state.phi
        r = r + b * state.r + d * state.r.conj()
    phi = np.maximum(phi, phi_floor)
    s = clamp_s(op.W.T @ (1.0 / phi))
    v = state.xhat + (op.AH @ (r / phi)) / s
    ev = denoise(v, s)
    _check(r, ev.value, ev.d_v, ev.d_vbar)
    return AmpState(xhat=ev.value, r=r, t=state.t + 1, phi=phi, s=s,
                    d_eta=ev.d_v, d_eta_bar=ev.d_vbar)


def sc_amp_step(state: AmpState, op: SensingOperator, y: np.ndarray,
                prior: BernoulliGaussianPrior, phi: np.ndarray, phi_floor: float = 1e-12) -> AmpState:
    """One coupled AMP iteration with the posterior-mean denoiser.

    Computes r^t from xhat^t and the cached Onsager memory, then
    xhat^{t+1} = eta(xhat^t + (Q^t o A_F)^* r^t) with s_i = sum_a W_ai / phi_a.
    """
    return _coupled_step(state, op, y, phi,
                         lambda v, s: posterior_mean_derivs(v, s, prior), phi_floor)


def camp_step(state: AmpState, op: SensingOperator, y: np.ndarray, alpha_star: float,
              phi: np.ndarray, phi_floor: float = 1e-12) -> AmpState:
    """Coupled CAMP iteration: soft threshold at theta_i = alpha* s_i^{-1/2}."""
    if alpha_star < 0:
        raise ValueError("alpha_star must be nonnegative")
    return _coupled_step(state, op, y, phi,
                         lambda v, s: soft_threshold_derivs(v, alpha_star / np.sqrt(s)), phi_floor)


def iid_amp_step(state: AmpState, op: SensingOperator, y: np.ndarray,
                 prior: BernoulliGaussianPrior, phi_scalar: float,
                 conjugate_onsager: str = "exact") -> AmpState:
    """Uncoupled AMP on unit-column-norm rows A = A_F sqrt(n/m).

    ``y`` is the measurement for A_F; it is rescaled internally. The Onsager
    terms are (1/delta) <d eta> r^{t-1} and, for the conjugate residual, either
    the exact sum_i A_ai^2 d_bar eta_i (``"exact"``) or the averaged
    (1/delta) <d_bar eta> (``"mean"``).
    """
    m, n = op.shape
    delta = m / n
    scale = 1.0 / np.sqrt(delta)
    A = op.freq_rows
    yy = scale * y
    r = yy - scale * (A @ state.xhat)
    if state.d_eta is not None:
        r = r + (np.mean(state.d_eta) / delta) * state.r
        if conjugate_onsager == "mean":
            r = r + (np.mean(state.d_eta_bar) / delta) * state.r.conj()
        elif conjugate_onsager == "exact":
            r = r + (scale**2 * (op.A2 @ state.d_eta_bar)) * state.r.conj()
        else:
            raise ValueError(f"unknown conjugate_onsager {conjugate_onsager!r}")
    s = float(clamp_s(1.0 / phi_scalar))
    v = state.xhat + scale * (op.AH @ r)
    ev = posterior_mean_derivs(v, s, prior)
    _check(r, ev.value, ev.d_v, ev.d_vbar)
    return AmpState(xhat=ev.value, r=r, t=state.t + 1, phi=np.array([phi_scalar]),
                    s=np.array([s]), d_eta=ev.d_v, d_eta_bar=ev.d_vbar)


def _run(step, n_steps_profile, profile_at, state, cfg: AmpConfig, x_true):
    traj = Trajectory()
    initial = mse_empirical(state.xhat, x_true) if x_true is not None else None

    def record(st):
        if x_true is None:
            return
        if (st.t - 1) % cfg.record_every == 0 or st.t == 1:
            traj.t.append(st.t)
            traj.mse.append(mse_empirical(st.xhat, x_true))
            if cfg.keep_snapshots:
                traj.snapshots.append(st.xhat.copy())

    record(state)
    history = [initial] if initial is not None else []
    while state.t < cfg.t_max:
        phi = profile_at(state.t)
        try:
            state = step(state, phi)
        except AmpDivergence:
            traj.diverged = True
            break
        if cfg.keep_snapshots:
            traj.phis.append(np.atleast_1d(phi).copy())
        record(state)
        if x_true is None:
            continue
        cur = traj.mse[-1] if traj.t and traj.t[-1] == state.t else mse_empirical(state.xhat, x_true)
        history.append(cur)
        if initial > 0 and cur > cfg.divergence_factor * initial:
            traj.diverged = True
            break
        w = cfg.stagnation_window
        if len(history) > w and abs(history[-1] - history[-1 - w]) < cfg.stagnation_tol:
            break
    if x_true is not None and traj.t[-1] != state.t:
        traj.t.append(state.t)
        traj.mse.append(mse_empirical(state.xhat, x_true))
    traj.final_xhat = state.xhat
    return traj


def _profile_lookup(profiles):
    last = len(profiles) - 1
    return lambda t: profiles[min(t - 1, last)]


def run_scheme1(op, y, prior, profiles, cfg: AmpConfig, x_true=None, x_init=None) -> Trajectory:
    """Iterate ``sc_amp_step``; iteration t consumes ``profiles[t-1]`` (the last one is held)."""
    state = initial_state(op, prior, x_init)
    return _run(lambda st, phi: sc_amp_step(st, op, y, prior, phi, cfg.phi_floor),
                len(profiles), _profile_lookup(profiles), state, cfg, x_true)


def run_scheme2(op, y, prior, phis, cfg: AmpConfig, x_true=None, x_init=None,
                conjugate_onsager: str = "exact") -> Trajectory:
    """Iterate ``iid_amp_step`` with the scalar SE sequence ``phis``."""
    state = initial_state(op, prior, x_init)
    lookup = _profile_lookup(list(phis))
    return _run(lambda st, phi: iid_amp_step(st, op, y, prior, max(float(phi), cfg.phi_floor),
                                             conjugate_onsager),
                len(phis), lookup, state, cfg, x_true)


def run_scheme3(op, y, alpha_star, profiles, cfg: AmpConfig, x_true=None, x_init=None) -> Trajectory:
    state = initial_state(op, None, x_init)
    return _run(lambda st, phi: camp_step(st, op, y, alpha_star, phi, cfg.phi_floor),
                len(profiles), _profile_lookup(profiles), state, cfg, x_true)
