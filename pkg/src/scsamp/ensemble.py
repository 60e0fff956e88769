"""Frequency-domain sensing operators: the spatially-coupled Gabor ensemble and
the random partial-Fourier baseline, plus measurement generation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .denoisers import complex_normal
from .kernel import KernelParams, freq_row_profile

BAND_CUTOFF = 1e-14
BULK = 0


@dataclass(frozen=True)
class EnsembleParams:
    n: int
    m1: int
    L: int
    ell: int
    xi: float
    delta: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.n < 2 or self.m1 < 0 or self.L < 0:
            raise ValueError("need n >= 2 and m1, L >= 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.m1 > self.n:
            raise ValueError("m1 cannot exceed n")
        if self.m > self.n:
            raise ValueError(f"m = {self.m} exceeds n = {self.n}")
        if self.m1 * self.L > 0.1 * self.n:
            warnings.warn(f"seed rows m1*L = {self.m1 * self.L} exceed 10% of n", stacklevel=2)
        KernelParams(self.n, self.xi, self.ell)

    @property
    def n_bulk(self) -> int:
        return int(np.floor(self.n * self.delta + 1e-9))

    @property
    def m(self) -> int:
        return self.m1 * self.L + self.n_bulk

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.n, self.xi, self.ell)


@dataclass(eq=False)
class SensingOperator:
    """m x n frequency-domain matrix A_F with row bookkeeping.

    ``labels[r]`` is the seed band k in 1..m1 or ``BULK`` (0). ``times`` and
    ``freqs`` hold (t_r, omega_r index) for rows that have them, -1 otherwise.
    """

    freq_rows: np.ndarray
    labels: np.ndarray
    times: np.ndarray
    freqs: np.ndarray
    params: EnsembleParams | None = None
    kind: str = "spatially_coupled"
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.freq_rows.shape

    @property
    def m(self) -> int:
        return self.freq_rows.shape[0]

    @property
    def n(self) -> int:
        return self.freq_rows.shape[1]

    @cached_property
    def W(self) -> np.ndarray:
        return (self.freq_rows * self.freq_rows.conj()).real

    @cached_property
    def A2(self) -> np.ndarray:
        """Entrywise square (not modulus) of A_F, used by the conjugate Onsager term."""
        return self.freq_rows * self.freq_rows

    @cached_property
    def AH(self) -> np.ndarray:
        return np.ascontiguousarray(self.freq_rows.conj().T)

    @cached_property
    def banded(self) -> sp.csr_matrix:
        a = np.where(np.abs(self.freq_rows) >= BAND_CUTOFF, self.freq_rows, 0.0)
        return sp.csr_matrix(a)

    @property
    def seed_rows(self) -> np.ndarray:
        return np.flatnonzero(self.labels != BULK)

    @property
    def bulk_rows(self) -> np.ndarray:
        return np.flatnonzero(self.labels == BULK)


def _bulk_frequencies(n: int, n_bulk: int) -> np.ndarray:
    # j-th bulk row sits at frequency index floor(j n / |R0|), ascending
    return (np.arange(n_bulk) * n) // n_bulk


def gabor_block(kernel: KernelParams, times: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Rows a_hat(.; t_r, omega_r) stacked, via the closed-form frequency expression."""
    n = kernel.n
    profile = freq_row_profile(kernel)
    d = (np.arange(n)[None, :] - freqs[:, None]) % n
    roots = np.exp(-2j * np.pi * np.arange(n) / n)
    return profile[d] * roots[(d * (times[:, None] % n)) % n]


def build_spatially_coupled(params: EnsembleParams, rng: np.random.Generator) -> SensingOperator:
    """Draw A_F from the ensemble M(n, m1, L, ell, xi, delta).

    Seed band k (1-based) is the canonical vector e_k, i.e. frequency index
    k - 1, repeated L times. Bulk rows follow, sorted by frequency index, with
    times drawn i.i.d. uniform on the cycle.
    """
    n, n_bulk = params.n, params.n_bulk
    n_seed = params.m1 * params.L
    seed_labels = np.repeat(np.arange(1, params.m1 + 1), params.L)
    seed = np.zeros((n_seed, n), dtype=complex)
    seed[np.arange(n_seed), seed_labels - 1] = 1.0

    freqs = _bulk_frequencies(n, n_bulk)
    times = rng.integers(0, n, size=n_bulk)
    bulk = gabor_block(params.kernel, times, freqs)

    return SensingOperator(
        freq_rows=np.vstack([seed, bulk]),
        labels=np.concatenate([seed_labels, np.full(n_bulk, BULK)]),
        times=np.concatenate([np.full(n_seed, -1), times]),
        freqs=np.concatenate([seed_labels - 1, freqs]),
        params=params,
    )


def coupled_weights(params: EnsembleParams) -> np.ndarray:
    """W = |A_F|^2 for the coupled ensemble; it does not depend on the random times."""
    n, n_bulk, n_seed = params.n, params.n_bulk, params.m1 * params.L
    W = np.zeros((n_seed + n_bulk, n))
    labels = np.repeat(np.arange(1, params.m1 + 1), params.L)
    W[np.arange(n_seed), labels - 1] = 1.0
    profile = freq_row_profile(params.kernel) ** 2
    d = (np.arange(n)[None, :] - _bulk_frequencies(n, n_bulk)[:, None]) % n
    W[n_seed:] = profile[d]
    return W


def build_random_fourier(n: int, m: int, rng: np.random.Generator) -> SensingOperator:
    """m rows of the unitary DFT at distinct random times: a_hat_r(w) = e^{-i w t_r} / sqrt(n)."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    times = np.sort(rng.choice(n, size=m, replace=False))
    k = np.arange(n)
    rows = np.exp(-2j * np.pi * ((times[:, None] * k[None, :]) % n) / n) / np.sqrt(n)
    return SensingOperator(
        freq_rows=rows,
        labels=np.full(m, BULK),
        times=times,
        freqs=np.full(m, -1),
        kind="random_fourier",
    )


def apply(op: SensingOperator, xhat: np.ndarray, banded: bool = False) -> np.ndarray:
    """A_F xhat. The banded path drops entries below 1e-14 in magnitude."""
    xhat = np.asarray(xhat)
    if xhat.shape != (op.n,):
        raise ValueError(f"expected a length-{op.n} vector, got shape {xhat.shape}")
    if banded:
        return op.banded @ xhat
    return op.freq_rows @ xhat


def adjoint_apply(op: SensingOperator, r: np.ndarray, row_weights: np.ndarray | None = None) -> np.ndarray:
    """A_F^* (w * r), optionally reweighting rows so callers get (Q o A_F)^* r for
    rank-one Q."""
    r = np.asarray(r)
    if r.shape != (op.m,):
        raise ValueError(f"expected a length-{op.m} vector, got shape {r.shape}")
    if row_weights is not None:
        r = row_weights * r
    return op.AH @ r


@dataclass(frozen=True)
class Measurements:
    y: np.ndarray
    sigma: float


def measure(op: SensingOperator, xhat: np.ndarray, sigma: float, rng: np.random.Generator) -> Measurements:
    """y = A_F xhat + w, w circularly-symmetric complex Gaussian with E|w_a|^2 = sigma^2."""
    y = apply(op, xhat)
    if sigma > 0:
        y = y + sigma * complex_normal(rng, op.m)
    return Measurements(y, sigma)


def dump_operator(op: SensingOperator, path: str | Path) -> None:
    """Plain-text audit record: params, seed row count, then one ``t_r omega_index`` pair per row."""
    lines = [f"# kind {op.kind}", f"# m {op.m}", f"# n {op.n}"]
    if op.params is not None:
        for key, value in vars(op.params).items():
            if key != "n":
                lines.append(f"# {key} {value}")
    lines.append(f"# seed_rows {op.seed_rows.size}")
    lines.append("# row label t omega_index")
    for r in range(op.m):
        lines.append(f"{r} {op.labels[r]} {op.times[r]} {op.freqs[r]}")
    Path(path).write_text("\n".join(lines) + "\n")
