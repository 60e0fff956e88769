"""Lazy random-walk kernel on the n-cycle and the discretised Gabor rows built from it.

Index conventions: time t and frequency index k both live in {0, ..., n-1};
time 0 is identified with time n (all sums are mod n) and k maps to the
frequency 2 pi k / n. With these labels the unitary DFT is ``np.fft.fft(x) / sqrt(n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPECTRAL_THRESHOLD = 64
UNDERFLOW = 1e-300


@dataclass(frozen=True)
class KernelParams:
    n: int
    xi: float
    ell: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1)")
        if self.ell < 0 or int(self.ell) != self.ell:
            raise ValueError("ell must be a nonnegative integer")


@dataclass(frozen=True)
class GaborRow:
    t_star: int
    omega_star: int
    time_row: np.ndarray
    freq_row: np.ndarray


def symbol_power(params: KernelParams, k) -> np.ndarray:
    """(1 - xi + xi cos(2 pi k / n))^ell, with underflow flushed to zero."""
    base = 1.0 - params.xi + params.xi * np.cos(2.0 * np.pi * np.asarray(k) / params.n)
    with np.errstate(under="ignore"):
        out = np.power(base, params.ell)
    out[np.abs(out) < UNDERFLOW] = 0.0
    return out


def walk_kernel_recursive(params: KernelParams, t_star: int) -> np.ndarray:
    p = np.zeros(params.n)
    p[t_star % params.n] = 1.0
    stay, move = 1.0 - params.xi, 0.5 * params.xi
    for _ in range(params.ell):
        p = stay * p + move * (np.roll(p, 1) + np.roll(p, -1))
    return p


def walk_kernel_spectral(params: KernelParams, t_star: int) -> np.ndarray:
    n = params.n
    lam = symbol_power(params, np.arange(n))
    p = np.fft.ifft(lam).real
    p = np.roll(p, t_star % n)
    # round-off leaves ~1e-17 negatives in the far tail
    return np.clip(p, 0.0, None)


def walk_kernel(params: KernelParams, t_star: int, method: str = "auto") -> np.ndarray:
    """ell-step lazy-walk distribution on the n-cycle started at ``t_star``."""
    if method == "auto":
        method = "spectral" if params.ell > SPECTRAL_THRESHOLD else "recursive"
    if method == "recursive":
        return walk_kernel_recursive(params, t_star)
    if method == "spectral":
        return walk_kernel_spectral(params, t_star)
    raise ValueError(f"unknown method {method!r}")


def normalization(params: KernelParams, t_star: int = 0) -> float:
    """C_ell, the Euclidean norm of a kernel row (the same for every t_star)."""
    return float(np.linalg.norm(walk_kernel(params, t_star)))


def _check_grid(params: KernelParams, omega_star) -> int:
    if int(omega_star) != omega_star or not 0 <= omega_star < params.n:
        raise ValueError(f"omega_star must be a frequency index in [0, {params.n}), got {omega_star}")
    return int(omega_star)


def gabor_row_time(params: KernelParams, t_star: int, omega_star: int) -> np.ndarray:
    """a(t) = e^{i omega_* t} P(t_*, t) / C_ell."""
    k = _check_grid(params, omega_star)
    n = params.n
    p = walk_kernel(params, t_star)
    t = np.arange(n)
    phase = np.exp(2j * np.pi * ((k * t) % n) / n)
    return phase * p / np.linalg.norm(p)


def freq_row_profile(params: KernelParams) -> np.ndarray:
    """Magnitude profile g[d] = (1 - xi + xi cos(2 pi d / n))^ell / (C_ell sqrt(n)), d = 0..n-1."""
    lam = symbol_power(params, np.arange(params.n))
    # Parseval: C_ell^2 = (1/n) sum_k lam_k^2
    c_ell = np.sqrt(np.sum(lam * lam) / params.n)
    return lam / (c_ell * np.sqrt(params.n))


def gabor_row_freq(params: KernelParams, t_star: int, omega_star: int) -> np.ndarray:
    """Closed-form DFT of ``gabor_row_time``:
    a_hat(w) = e^{-i (w - w_*) t_*} (1 - xi + xi cos(w - w_*))^ell / (C_ell sqrt(n)).
    """
    k_star = _check_grid(params, omega_star)
    n = params.n
    d = (np.arange(n) - k_star) % n
    phase = np.exp(-2j * np.pi * ((d * (t_star % n)) % n) / n)
    return phase * freq_row_profile(params)[d]


def gabor_row(params: KernelParams, t_star: int, omega_star: int) -> GaborRow:
    return GaborRow(t_star, omega_star, gabor_row_time(params, t_star, omega_star),
                    gabor_row_freq(params, t_star, omega_star))


def effective_bandwidth(params: KernelParams, coverage: float) -> float:
    """Width (radians) of the smallest symmetric window around omega_* holding
    ``coverage`` of a row's squared norm. Each frequency bin counts 2 pi / n.
    """
    if not 0.0 < coverage <= 1.0:
        raise ValueError("coverage must lie in (0, 1]")
    n = params.n
    mass = freq_row_profile(params) ** 2
    # mass is symmetric in d <-> n - d; a half-width-h window holds d = -h..h
    pair = mass[1 : n // 2 + 1] + mass[::-1][: n // 2]
    if n % 2 == 0:
        pair[-1] = mass[n // 2]  # the antipode is a single bin
    window = mass[0] + np.concatenate([[0.0], np.cumsum(pair)])
    h = int(np.argmax(window >= coverage * (1.0 - 1e-12)))
    return 2.0 * np.pi * min(2 * h + 1, n) / n
