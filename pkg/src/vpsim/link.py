"""Channel generation, noise, the power-scaling-factor error model, and the receiver.

The downlink is i.i.d. Rayleigh block fading: one channel draw per frame,
entries complex Gaussian with unit variance. Receivers are non-cooperative;
each of them rescales its sample with the (possibly wrong) power scaling
factor it was given, folds out the perturbation lattice with the modulo
operator, and slices to the nearest constellation point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modem import Constellation, demap, modulo

BETA_EXACT = "exact"
BETA_FIXED_SQR = "fixed-sqr"
BETA_NOISE_ADAPTIVE = "noise-adaptive"
BETA_MODES = (BETA_EXACT, BETA_FIXED_SQR, BETA_NOISE_ADAPTIVE)

# exponents for which sigma_q2 = sigma_n2**e keeps sigma_q2 >= sigma_n2 on (0, 1]
ADAPTIVE_EXPONENTS = (1.0, 2.0 / 3.0, 0.5)


@dataclass(frozen=True)
class ChannelRealization:
    """One flat-fading downlink draw: ``matrix`` is N_r x N_t."""

    matrix: np.ndarray
    n_t: int
    n_r: int


@dataclass(frozen=True)
class NoiseConfig:
    """SNR point; under the unit transmit power constraint ``rho = 1 / sigma_n2``."""

    snr_db: float
    sigma_n2: float

    def __post_init__(self):
        expected = 10.0 ** (-self.snr_db / 10.0)
        if not math.isclose(self.sigma_n2, expected, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"sigma_n2={self.sigma_n2!r} does not match snr_db={self.snr_db!r}")

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseConfig":
        return cls(snr_db=snr_db, sigma_n2=10.0 ** (-snr_db / 10.0))


@dataclass(frozen=True)
class BetaErrorModel:
    """How the scaling factor delivered to the receivers deviates from the true one.

    The relative error ``(beta - beta_hat) / beta`` is zero-mean Gaussian with
    variance ``sigma_q2``, where ``sigma_q2`` is 0 (``exact``), a constant set
    by the signal-to-quantization-error ratio in dB (``fixed-sqr``), or
    ``sigma_n2 ** exponent`` tracking the operating SNR (``noise-adaptive``).
    """

    mode: str = BETA_EXACT
    sqr_db: float | None = None
    exponent: float | None = None

    def __post_init__(self):
        if self.mode not in BETA_MODES:
            raise ValueError(f"unknown beta error mode {self.mode!r}")
        if self.mode == BETA_FIXED_SQR:
            if self.sqr_db is None:
                raise ValueError("fixed-sqr mode requires sqr_db")
        elif self.sqr_db is not None:
            raise ValueError(f"sqr_db is only meaningful in fixed-sqr mode, not {self.mode!r}")
        if self.mode == BETA_NOISE_ADAPTIVE:
            if self.exponent is None:
                raise ValueError("noise-adaptive mode requires an exponent")
            snapped = [e for e in ADAPTIVE_EXPONENTS if abs(self.exponent - e) < 1e-4]
            if not snapped:
                raise ValueError(
                    f"exponent must be one of {ADAPTIVE_EXPONENTS}, got {self.exponent!r}"
                )
            object.__setattr__(self, "exponent", snapped[0])
        elif self.exponent is not None:
            raise ValueError(f"exponent is only meaningful in noise-adaptive mode, not {self.mode!r}")

    def sigma_q2(self, sigma_n2: float = 0.0) -> float:
        """Relative-error variance at the given noise level."""
        if self.mode == BETA_EXACT:
            return 0.0
        if self.mode == BETA_FIXED_SQR:
            return 10.0 ** (-self.sqr_db / 10.0)
        return float(sigma_n2**self.exponent)


def draw_channel(n_t: int, n_r: int, rng: np.random.Generator) -> ChannelRealization:
    """Fresh i.i.d. complex Gaussian channel, per-entry variance 1 (halves per axis)."""
    if not (1 <= n_r <= n_t):
        raise ValueError(f"need 1 <= N_r <= N_t, got N_r={n_r}, N_t={n_t}")
    h = rng.standard_normal((2, n_r, n_t))
    return ChannelRealization(
        matrix=math.sqrt(0.5) * (h[0] + 1j * h[1]), n_t=n_t, n_r=n_r
    )


def apply_channel(
    h: np.ndarray, x: np.ndarray, sigma_n2: float, rng: np.random.Generator
) -> np.ndarray:
    """``y = H x + n`` with per-entry complex noise variance ``sigma_n2``.

    ``x`` must already carry unit power; this is where the transmit power
    constraint that defines the SNR is enforced.
    """
    h = np.asarray(h, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if h.ndim != 2 or x.shape != (h.shape[1],):
        raise ValueError(f"shape mismatch: H is {h.shape}, x is {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValueError("transmit vector must have unit norm")
    if sigma_n2 < 0:
        raise ValueError(f"sigma_n2 must be >= 0, got {sigma_n2!r}")
    n = rng.standard_normal((2, h.shape[0]))
    return h @ x + math.sqrt(sigma_n2 / 2.0) * (n[0] + 1j * n[1])


def perturb_beta(
    beta: float,
    model: BetaErrorModel,
    rng: np.random.Generator,
    sigma_n2: float = 0.0,
) -> float:
    """Scaling factor as seen by the receivers: ``beta * (1 - g)``, ``g ~ N(0, sigma_q2)``.

    ``sigma_n2`` is consulted only in noise-adaptive mode. Draws with
    ``g >= 1`` would produce a non-positive factor and are redrawn; at the
    variances of interest (sigma_q2 <= 0.04) this happens with probability
    below 1e-6, so the distortion is negligible.
    """
    if not (beta > 0):
        raise ValueError(f"beta must be positive, got {beta!r}")
    sq = model.sigma_q2(sigma_n2)
    if sq == 0.0:
        return beta
    std = math.sqrt(sq)
    g = rng.normal(0.0, std)
    while g >= 1.0:
        g = rng.normal(0.0, std)
    return beta * (1.0 - g)


def receive(
    y: np.ndarray, beta_hat: float, tau: float, c: Constellation
) -> tuple[np.ndarray, np.ndarray]:
    """Per-user receiver chain: rescale, modulo-fold, slice.

    Returns the folded symbol estimates and the demapped bits. Each entry is
    processed independently (the users cannot cooperate).
    """
    if not (beta_hat > 0):
        raise ValueError(f"beta_hat must be positive, got {beta_hat!r}")
    symbols = modulo(beta_hat * np.asarray(y, dtype=complex), tau)
    return symbols, demap(symbols, c)
