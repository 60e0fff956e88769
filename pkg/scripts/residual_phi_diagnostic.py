"""Diagnostic only: coupled AMP at desk scale with phi taken from the SE schedule
versus phi estimated from the current residual.

The library runs the SE-scheduled variant. With only ~15-20 rows touching each
column, the actual residual energy exceeds the SE value after a couple of
iterations and the scheduled denoiser becomes overconfident. This script
prints, per iteration, the ratio of smoothed residual energy to the SE phi and
the MSE of both variants on the same instances.
"""
import argparse

import numpy as np

from scsamp.amp import AmpDivergence, initial_state, mse_empirical, sc_amp_step
from scsamp.denoisers import sample_signal
from scsamp.ensemble import build_spatially_coupled, measure
from scsamp.experiments import ExperimentConfig, coupled_profiles, seed_plan

ap = argparse.ArgumentParser()
ap.add_argument("--delta", type=float, default=0.15)
ap.add_argument("--instances", type=int, default=3)
ap.add_argument("--iters", type=int, default=60)
args = ap.parse_args()

cfg = ExperimentConfig.from_dict(dict(delta=args.delta))
params = cfg.ensemble()
prior = cfg.prior
profiles = coupled_profiles(params, cfg.epsilon, cfg.horizon(params.m))


def residual(state, op, y):
    """r^t exactly as the AMP step forms it, before phi is chosen."""
    r = y - op.freq_rows @ state.xhat
    if state.d_eta is not None:
        b = (op.W @ (state.d_eta / state.s)) / state.phi
        d = (op.A2 @ (state.d_eta_bar / state.s)) / state.phi
        r = r + b * state.r + d * state.r.conj()
    return r


for i in range(args.instances):
    rng = np.random.default_rng(seed_plan(cfg.seed, "diagnostic", i))
    op = build_spatially_coupled(params, rng)
    x = sample_signal(params.n, prior, rng)
    y = measure(op, x, params.sigma, rng).y
    # row smoother: rows sharing columns pool their residual energy
    S = op.W @ op.W.T
    S /= S.sum(axis=1, keepdims=True)

    sched, est = initial_state(op, prior), initial_state(op, prior)
    alive = True
    print(f"instance {i}")
    print("   t  energy/phi_SE   mse_scheduled   mse_residual")
    for t in range(1, args.iters + 1):
        phi_se = profiles[min(t - 1, len(profiles) - 1)]
        if alive:
            ratio = float(np.mean(S @ np.abs(residual(sched, op, y)) ** 2 / phi_se))
            try:
                sched = sc_amp_step(sched, op, y, prior, phi_se)
                m_sched = mse_empirical(sched.xhat, x)
            except AmpDivergence:
                m_sched = float("inf")
            if not np.isfinite(m_sched) or m_sched > 1e3 * prior.second_moment:
                print(f"  scheduled variant diverged at t={t}")
                alive = False
        else:
            ratio = m_sched = float("nan")
        phi_hat = np.maximum(S @ np.abs(residual(est, op, y)) ** 2, cfg.sigma**2)
        est = sc_amp_step(est, op, y, prior, phi_hat)
        m_est = mse_empirical(est.xhat, x)
        if t <= 5 or t % 10 == 0:
            print(f"{t:4d}  {ratio:12.3f}   {m_sched:13.3e}   {m_est:12.3e}")
