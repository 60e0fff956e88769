"""Seeded Monte Carlo experiments: SE profile evolution, AMP-vs-SE MSE curves,
phase-transition sweeps for the three schemes, and the logistic fit."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import expit
from threadpoolctl import threadpool_limits

from .amp import AmpConfig, Trajectory, run_scheme1, run_scheme2, run_scheme3
from .denoisers import BernoulliGaussianPrior, sample_signal
from .ensemble import (
    EnsembleParams,
    build_random_fourier,
    build_spatially_coupled,
    coupled_weights,
    measure,
)
from .state_evolution import (
    predicted_mse_curve,
    se_camp_run,
    se_iid_run,
    se_sc_run,
    tune_alpha,
)

SCHEMES = ("I", "II", "III")
PROFILE_HEADER = ["t", "row_index", "phi"]
MSE_HEADER = ["t", "mse_amp_mean", "mse_amp_stderr", "mse_se"]
PHASE_HEADER = ["epsilon", "delta", "instances", "successes", "success_rate"]
THRESHOLD_HEADER = ["epsilon", "delta_tilde", "s_star"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def parse_grid(text: str) -> np.ndarray:
    """'a:b:step' -> inclusive grid a, a+step, ..., b (rounded to 12 digits)."""
    try:
        a, b, step = (float(u) for u in str(text).split(":"))
    except ValueError as exc:
        raise ConfigError(f"grid must look like start:stop:step, got {text!r}") from exc
    if step <= 0 or b < a:
        raise ConfigError(f"empty grid {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1000
    m1: int = 20
    L: int = 3
    ell: int = 160
    xi: float = 0.5
    delta: float = 0.15
    sigma: float = 1e-3
    epsilon: float = 0.1
    scheme: str = "I"
    instances: int = 20
    t_max: int | None = None
    seed: int = 0
    success_threshold: float | None = None
    delta_grid: str = "0.18:0.32:0.01"
    epsilon_list: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.3])
    record_every: int = 1

    def __post_init__(self):
        for name in ("n", "m1", "L", "ell", "instances", "seed", "record_every"):
            if not isinstance(getattr(self, name), int) or isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be an integer")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.instances < 1:
            raise ConfigError("instances must be >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if not self.epsilon_list or any(not 0.0 < e < 1.0 for e in self.epsilon_list):
            raise ConfigError("epsilon_list must be non-empty with entries in (0, 1)")
        if self.t_max is not None and self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.success_threshold is not None and self.success_threshold <= 0:
            raise ConfigError("success_threshold must be positive")
        parse_grid(self.delta_grid)
        try:
            self.ensemble()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def ensemble(self, delta: float | None = None, sigma: float | None = None) -> EnsembleParams:
        return EnsembleParams(self.n, self.m1, self.L, self.ell, self.xi,
                              self.delta if delta is None else delta,
                              self.sigma if sigma is None else sigma)

    @property
    def prior(self) -> BernoulliGaussianPrior:
        return BernoulliGaussianPrior(self.epsilon)

    def horizon(self, m: int) -> int:
        return self.t_max if self.t_max is not None else 4 * m

    def threshold_for(self, epsilon: float) -> float:
        return self.success_threshold if self.success_threshold is not None else 1e-4 * epsilon

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a flat JSON object")
        return cls.from_dict(data)


def seed_plan(master_seed: int, experiment_id: str, instance_index: int) -> int:
    """Counter-mode hash of (master seed, experiment id, instance index) to a u64."""
    h = hashlib.blake2b(digest_size=8, person=b"scsamp-seed")
    h.update(struct.pack("<Q", master_seed % 2**64))
    h.update(experiment_id.encode())
    h.update(struct.pack("<Q", instance_index))
    return int.from_bytes(h.digest(), "little")


# --- parallel plumbing ---------------------------------------------------------

def _call(job):
    fn, args = job
    with threadpool_limits(1):
        return fn(*args)


def run_jobs(fn, arg_list, threads: int = 1) -> list:
    """Apply ``fn`` to each argument tuple; results come back in input order
    regardless of ``threads``. BLAS is pinned to one thread in every worker."""
    jobs = [(fn, args) for args in arg_list]
    if threads <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_call, jobs, chunksize=1))


# --- state-evolution sequences (cached per process) ------------------------------

@lru_cache(maxsize=64)
def coupled_profiles(params: EnsembleParams, epsilon: float, t_max: int) -> tuple:
    W = coupled_weights(params)
    return tuple(se_sc_run(W, params.sigma, BernoulliGaussianPrior(epsilon), t_max))


@lru_cache(maxsize=64)
def camp_profiles(params: EnsembleParams, epsilon: float, alpha: float, t_max: int) -> tuple:
    W = coupled_weights(params)
    return tuple(se_camp_run(W, BernoulliGaussianPrior(epsilon), alpha, t_max))


@lru_cache(maxsize=64)
def iid_phis(delta: float, sigma: float, epsilon: float, t_max: int) -> np.ndarray:
    return se_iid_run(delta, sigma, BernoulliGaussianPrior(epsilon), t_max).phi


@lru_cache(maxsize=16)
def scheme3_alpha(epsilon: float) -> float:
    return tune_alpha(epsilon)[0]


# --- single instances --------------------------------------------------------

@dataclass
class InstanceResult:
    t: list[int]
    mse: list[float]
    diverged: bool

    @property
    def final_mse(self) -> float:
        return self.mse[-1]


def run_instance(scheme: str, params: EnsembleParams, epsilon: float, seed: int,
                 t_max: int, record_every: int = 1) -> InstanceResult:
    """Draw operator, signal and noise from ``seed`` (in that order) and run one scheme."""
    rng = np.random.default_rng(seed)
    prior = BernoulliGaussianPrior(epsilon)
    cfg = AmpConfig(t_max=t_max, record_every=record_every)
    if scheme == "II":
        op = build_random_fourier(params.n, params.n_bulk, rng)
    else:
        op = build_spatially_coupled(params, rng)
    x = sample_signal(params.n, prior, rng)
    y = measure(op, x, params.sigma, rng).y
    if scheme == "I":
        traj = run_scheme1(op, y, prior, coupled_profiles(params, epsilon, t_max), cfg, x_true=x)
    elif scheme == "II":
        traj = run_scheme2(op, y, prior, iid_phis(params.delta, params.sigma, epsilon, t_max), cfg, x_true=x)
    else:
        alpha = scheme3_alpha(epsilon)
        traj = run_scheme3(op, y, alpha, camp_profiles(params, epsilon, alpha, t_max), cfg, x_true=x)
    return InstanceResult(traj.t, traj.mse, traj.diverged)


def trajectory_of(result: InstanceResult) -> Trajectory:
    return Trajectory(t=list(result.t), mse=list(result.mse), diverged=result.diverged)


# --- profile evolution ---------------------------------------------------------

def recorded_iterations(t_last: int, record_every: int) -> list[int]:
    ts = {t for t in (1, 5) if t <= t_last}
    ts.update(range(0, t_last + 1, record_every))
    ts.add(t_last)
    return sorted(ts)


def run_profile_experiment(cfg: ExperimentConfig) -> list[tuple[int, int, float]]:
    """Coupled SE from the no-information profile; rows (t, row_index, phi).

    ``t`` counts SE updates, so t = 0 is the no-information profile.
    """
    params = cfg.ensemble()
    profiles = coupled_profiles(params, cfg.epsilon, cfg.horizon(params.m))
    rows = []
    for t in recorded_iterations(len(profiles) - 1, cfg.record_every):
        rows.extend((t, a, float(v)) for a, v in enumerate(profiles[t]))
    return rows


# --- MSE comparison ---------------------------------------------------------

@dataclass
class MseComparison:
    t: np.ndarray
    mse_amp_mean: np.ndarray
    mse_amp_stderr: np.ndarray
    mse_se: np.ndarray
    diverged: int
    instances: int
    trajectories: list[InstanceResult] = field(default_factory=list)

    def rows(self):
        return zip(self.t.tolist(), self.mse_amp_mean.tolist(),
                   self.mse_amp_stderr.tolist(), self.mse_se.tolist())


def _hold(result: InstanceResult, ts: np.ndarray) -> np.ndarray:
    """MSE at each recorded t, holding the last value after an early (stagnation) stop."""
    t = np.asarray(result.t)
    idx = np.searchsorted(t, ts, side="right") - 1
    return np.asarray(result.mse)[np.clip(idx, 0, None)]


def run_mse_comparison(cfg: ExperimentConfig, threads: int = 1) -> MseComparison:
    """M seeded Scheme-I runs against the (operator-independent) SE prediction.

    Diverged instances are counted and left out of the mean.
    """
    params = cfg.ensemble()
    t_max = cfg.horizon(params.m)
    profiles = coupled_profiles(params, cfg.epsilon, t_max)
    seeds = [seed_plan(cfg.seed, "mse", i) for i in range(cfg.instances)]
    results = run_jobs(run_instance,
                       [("I", params, cfg.epsilon, s, t_max, cfg.record_every) for s in seeds],
                       threads)
    ts = np.array([t for t in range(1, t_max + 1) if (t - 1) % cfg.record_every == 0])
    se = predicted_mse_curve(list(profiles), coupled_weights(params), cfg.prior, t_max)[ts - 1]
    good = [r for r in results if not r.diverged]
    if good:
        stack = np.array([_hold(r, ts) for r in good])
        mean = stack.mean(axis=0)
        stderr = stack.std(axis=0, ddof=1) / np.sqrt(len(good)) if len(good) > 1 else np.zeros_like(mean)
    else:
        mean = np.full(ts.shape, np.nan)
        stderr = np.full(ts.shape, np.nan)
    return MseComparison(ts, mean, stderr, se, len(results) - len(good), len(results), results)


@dataclass(frozen=True)
class DecayReport:
    monotone: bool
    slope_linear: float
    slope_log10: float


def mse_decay_report(res: MseComparison, start: int = 5) -> DecayReport:
    """Is the mean AMP MSE non-increasing from iteration ``start`` on (upticks up to
    3 stderr tolerated)? Also reports least-squares slopes of MSE and log10 MSE per iteration."""
    keep = (res.t >= start) & np.isfinite(res.mse_amp_mean)
    t, m, se = res.t[keep], res.mse_amp_mean[keep], res.mse_amp_stderr[keep]
    if t.size < 2:
        return DecayReport(True, float("nan"), float("nan"))
    rise = np.diff(m)
    tol = 3.0 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    monotone = bool(np.all(rise <= tol))
    pos = m > 0
    log_slope = float(np.polyfit(t[pos], np.log10(m[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    return DecayReport(monotone, float(np.polyfit(t, m, 1)[0]), log_slope)


# --- phase transitions -----------------------------------------------------------

@dataclass(frozen=True)
class LogitFit:
    delta_c: float
    beta: float | None
    ci_low: float
    ci_high: float
    flags: tuple[str, ...] = ()

    @property
    def ci_halfwidth(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass
class PhaseSweepResult:
    scheme: str
    epsilon: float
    deltas: np.ndarray
    instances: np.ndarray
    successes: np.ndarray
    fit: LogitFit
    diverged: int = 0

    def rows(self):
        for d, m, k in zip(self.deltas, self.instances, self.successes):
            yield self.epsilon, float(d), int(m), int(k), float(k) / float(m)

    def fit_json(self) -> dict:
        return {"epsilon": self.epsilon, "delta_c": self.fit.delta_c, "beta": self.fit.beta,
                "ci_low": self.fit.ci_low, "ci_high": self.fit.ci_high,
                "flags": list(self.fit.flags)}


def _separation(d, k, m):
    """(last all-failure delta, first all-success delta) if outcomes are perfectly separated."""
    fail, ok = k == 0, k == m
    if not np.all(fail | ok) or fail.all() or ok.all():
        return None
    last_fail, first_ok = float(d[fail].max()), float(d[ok].min())
    return (last_fail, first_ok) if last_fail < first_ok else None


def fit_logit(points, z: float = 1.959963984540054, max_iter: int = 100) -> LogitFit:
    """ML fit of p(delta) = 1 / (1 + exp(-(delta - delta_c) / beta)) to (delta, successes, instances).

    Damped Newton on (a, b) with p = expit(a + b u), u the standardised delta;
    the CI on delta_c comes from the observed information via the delta method.
    """
    pts = sorted((float(d), int(k), int(m)) for d, k, m in points)
    if not pts:
        raise ValueError("no points to fit")
    d = np.array([p[0] for p in pts])
    k = np.array([p[1] for p in pts], dtype=float)
    m = np.array([p[2] for p in pts], dtype=float)
    if np.any(m < 1) or np.any(k < 0) or np.any(k > m):
        raise ValueError("need 0 <= successes <= instances and instances >= 1")
    lo, hi = float(d.min()), float(d.max())

    if np.all(k == 0):
        return LogitFit(hi, None, hi, hi, ("degenerate", "all_failure", "extrapolated"))
    if np.all(k == m):
        return LogitFit(lo, None, lo, lo, ("degenerate", "all_success", "extrapolated"))
    sep = _separation(d, k, m)
    if sep is not None:
        return LogitFit(0.5 * float(sep[0] + sep[1]), None, float(sep[0]), float(sep[1]), ("separated",))

    flags = []
    mixed = int(np.sum((k > 0) & (k < m)))
    if mixed < 2:
        flags.append("degenerate")
    centre, scale = float(d.mean()), float(d.std()) or 1.0
    u = (d - centre) / scale

    def loglik(a, b):
        eta = a + b * u
        return float(np.sum(k * eta - m * np.logaddexp(0.0, eta)))

    a, b = 0.0, 1.0
    converged = False
    for _ in range(max_iter):
        p = expit(a + b * u)
        grad = np.array([np.sum(k - m * p), np.sum((k - m * p) * u)])
        w = m * p * (1.0 - p)
        info = np.array([[w.sum(), (w * u).sum()], [(w * u).sum(), (w * u * u).sum()]])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            break
        cur, lam = loglik(a, b), 1.0
        while lam > 1e-10 and loglik(a + lam * step[0], b + lam * step[1]) < cur - 1e-12:
            lam *= 0.5
        a, b = a + lam * step[0], b + lam * step[1]
        if np.max(np.abs(lam * step)) < 1e-10:
            converged = True
            break
    if not converged:
        flags.append("nonconverged")
    if b <= 0:
        flags.append("nonincreasing")

    p = expit(a + b * u)
    w = m * p * (1.0 - p)
    info = np.array([[w.sum(), (w * u).sum()], [(w * u).sum(), (w * u * u).sum()]])
    delta_c = centre - scale * a / b
    beta = scale / b
    try:
        cov = np.linalg.inv(info)
        g = np.array([-1.0 / b, a / b**2]) * scale
        var = float(g @ cov @ g)
        sd = float(np.sqrt(var)) if np.isfinite(var) and var >= 0 else float("inf")
    except np.linalg.LinAlgError:
        sd = float("inf")
        flags.append("singular_information")
    ci = (delta_c - z * sd, delta_c + z * sd)
    if not (converged and np.isfinite(delta_c) and np.isfinite(sd)):
        # quasi-separated data: the slope runs off, so bracket delta_c by grid neighbours
        flags.append("quasi_separated")
        delta_c = float(d[np.argmin(np.abs(k / m - 0.5))]) if not np.isfinite(delta_c) else delta_c
        below, above = d[d < delta_c], d[d > delta_c]
        ci = (float(below.max()) if below.size else lo, float(above.min()) if above.size else hi)
    if not lo <= delta_c <= hi:
        flags.append("extrapolated")
    beta = float(beta) if np.isfinite(beta) else None
    return LogitFit(float(delta_c), beta, float(ci[0]), float(ci[1]), tuple(flags))


def run_phase_sweep(cfg: ExperimentConfig, scheme: str | None = None, epsilon: float | None = None,
                    deltas=None, threads: int = 1) -> PhaseSweepResult:
    """Noiseless sweep over ``deltas``; success is final MSE <= the success threshold."""
    scheme = scheme or cfg.scheme
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}")
    eps = cfg.epsilon if epsilon is None else float(epsilon)
    grid = parse_grid(cfg.delta_grid) if deltas is None else np.asarray(deltas, dtype=float)
    threshold = cfg.threshold_for(eps)
    jobs, keys = [], []
    for delta in grid:
        try:
            params = cfg.ensemble(delta=float(delta), sigma=0.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        t_max = cfg.horizon(params.m)
        exp_id = f"phase/{scheme}/{eps!r}/{float(delta)!r}"
        for i in range(cfg.instances):
            jobs.append((scheme, params, eps, seed_plan(cfg.seed, exp_id, i), t_max, t_max))
            keys.append(float(delta))
    if scheme == "III":
        scheme3_alpha(eps)  # warm the cache before forking workers
    results = run_jobs(run_instance, jobs, threads)
    succ = {float(d): 0 for d in grid}
    diverged = 0
    for key, res in zip(keys, results):
        diverged += res.diverged
        succ[key] += (not res.diverged) and res.final_mse <= threshold
    m = np.full(grid.shape, cfg.instances)
    k = np.array([succ[float(d)] for d in grid])
    fit = fit_logit(list(zip(grid.tolist(), k.tolist(), m.tolist())))
    return PhaseSweepResult(scheme, eps, grid, m, k, fit, diverged)


def success_monotone(sweep: PhaseSweepResult, z: float = 3.0) -> bool:
    """Success rate non-decreasing in delta up to ``z`` binomial standard errors."""
    rate = sweep.successes / sweep.instances
    var = np.maximum(rate * (1 - rate), 0.25 / sweep.instances) / sweep.instances
    drop = rate[:-1] - rate[1:]
    return bool(np.all(drop <= z * np.sqrt(var[:-1] + var[1:])))


# --- writers ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_fit_json(path: str | Path, sweep: PhaseSweepResult) -> None:
    data = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
            for k, v in sweep.fit_json().items()}
    Path(path).write_text(json.dumps(data, indent=2, allow_nan=False) + "\n")
