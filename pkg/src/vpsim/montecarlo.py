"""Trial engine and sweep orchestration for the bit-error-rate experiments.

One trial is a full frame: draw a channel, build the configured precoder,
modulate fresh bits, search the perturbation, transmit, add noise, corrupt the
scaling factor, receive, and count bit errors. Trials are independent and each
derives its random stream from ``(master_seed, snr_index, trial_index)``, so
aggregate counts do not depend on execution order or on how many workers run
them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .link import (
    BetaErrorModel,
    NoiseConfig,
    apply_channel,
    draw_channel,
    perturb_beta,
    receive,
)
from .modem import make_constellation, map_bits
from .precoding import (
    SCHEMES,
    PrecoderSet,
    SingularChannelError,
    mmse_precoder,
    perturbed_frame,
    robust_precoder,
    zf_precoder,
)

MAX_CHANNEL_REDRAWS = 100

# fraction of aborted trials above which a BER point is considered invalid
ABORT_FAILURE_RATE = 1e-3


class TrialAborted(RuntimeError):
    """A single trial gave up (e.g. persistent singular channel draws)."""


class SweepError(RuntimeError):
    """A sweep produced a point that cannot be trusted."""


@dataclass(frozen=True)
class SimConfig:
    """Full description of one BER sweep; hashable and cheap to ship to workers."""

    n_t: int = 4
    n_r: int = 2
    mod_order: int = 16
    scheme: str = "cvp"
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    beta_error: BetaErrorModel = BetaErrorModel()
    trials: int = 10000
    min_bit_errors: int = 0
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not (1 <= self.n_r <= self.n_t):
            raise ValueError(f"need 1 <= N_r <= N_t, got N_r={self.n_r}, N_t={self.n_t}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        grid = tuple(float(v) for v in self.snr_grid_db)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr_grid_db must be non-empty and strictly increasing")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.min_bit_errors < 0:
            raise ValueError(f"min_bit_errors must be >= 0, got {self.min_bit_errors}")
        if not (0 <= self.master_seed < 2**64):
            raise ValueError("master_seed must fit in 64 bits")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        make_constellation(self.mod_order)  # validates the order


@dataclass(frozen=True)
class BerPoint:
    """Aggregated counts for one (scheme, SNR) grid entry."""

    scheme: str
    snr_db: float
    sigma_q2: float
    trials: int
    bits: int
    bit_errors: int
    ber: float
    ci_half_width: float
    aborted_trials: int = 0

    @property
    def ci_is_normal_valid(self) -> bool:
        # the normal-approximation interval is only meaningful with enough errors
        return self.bit_errors >= 20


@lru_cache(maxsize=8)
def _constellation(order: int):
    return make_constellation(order)


def _trial_rng(master_seed: int, snr_index: int, trial_index: int) -> np.random.Generator:
    # counter-style split: the stream is a pure function of the indices
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(snr_index, trial_index))
    )


def _precoder_for(scheme: str, h: np.ndarray, sigma_n2: float, sigma_q2: float) -> PrecoderSet:
    if scheme == "cvp":
        return zf_precoder(h)
    if scheme == "mmse-vp":
        return mmse_precoder(h, sigma_n2)
    if scheme == "robust-vp":
        return robust_precoder(h, sigma_n2, sigma_q2)
    raise ValueError(f"unknown scheme {scheme!r}")


def run_trial(cfg: SimConfig, snr_index: int, trial_index: int) -> int:
    """Simulate one frame and return its bit error count.

    Deterministic given ``(cfg.master_seed, snr_index, trial_index)``. Singular
    channel draws are retried from the same stream; persistent failure aborts
    the trial.
    """
    rng = _trial_rng(cfg.master_seed, snr_index, trial_index)
    const = _constellation(cfg.mod_order)
    sigma_n2 = NoiseConfig.from_snr_db(cfg.snr_grid_db[snr_index]).sigma_n2
    sigma_q2 = cfg.beta_error.sigma_q2(sigma_n2)

    for _ in range(MAX_CHANNEL_REDRAWS):
        ch = draw_channel(cfg.n_t, cfg.n_r, rng)
        try:
            ps = _precoder_for(cfg.scheme, ch.matrix, sigma_n2, sigma_q2)
            break
        except SingularChannelError:
            continue
    else:
        raise TrialAborted(
            f"no invertible channel after {MAX_CHANNEL_REDRAWS} draws "
            f"(snr_index={snr_index}, trial={trial_index})"
        )

    bits = rng.integers(0, 2, size=cfg.n_r * const.bits_per_symbol)
    u = map_bits(bits, const)
    frame = perturbed_frame(ps, u, const.tau)
    y = apply_channel(ch.matrix, frame.transmit, sigma_n2, rng)
    beta_hat = perturb_beta(frame.beta, cfg.beta_error, rng, sigma_n2=sigma_n2)
    _, rx_bits = receive(y, beta_hat, const.tau, const)
    return int(np.count_nonzero(rx_bits != bits))


def _run_range(cfg: SimConfig, snr_index: int, start: int, count: int) -> tuple[int, int, int]:
    """Worker body: trials [start, start+count) -> (bit_errors, completed, aborted)."""
    errors = completed = aborted = 0
    for trial in range(start, start + count):
        try:
            errors += run_trial(cfg, snr_index, trial)
            completed += 1
        except TrialAborted:
            aborted += 1
    return errors, completed, aborted


def _dispatch(executor, cfg, snr_index, start, count):
    if executor is None:
        return [_run_range(cfg, snr_index, start, count)]
    chunk = math.ceil(count / cfg.workers)
    futures = []
    offset = start
    while offset < start + count:
        take = min(chunk, start + count - offset)
        futures.append(executor.submit(_run_range, cfg, snr_index, offset, take))
        offset += take
    return [f.result() for f in futures]


def sweep(cfg: SimConfig, progress=None) -> list[BerPoint]:
    """Run the configured trials at every SNR grid point.

    Early stop: when ``cfg.min_bit_errors > 0``, a point stops once it has both
    accumulated that many bit errors and run at least 1% of its trial budget;
    the stop decision is taken at fixed batch boundaries so the outcome does
    not depend on the worker count. Points whose aborted-trial fraction
    exceeds ``ABORT_FAILURE_RATE`` fail the sweep.
    """
    const = _constellation(cfg.mod_order)
    bits_per_trial = cfg.n_r * const.bits_per_symbol
    batch = cfg.trials if cfg.min_bit_errors == 0 else max(1, math.ceil(cfg.trials / 100))
    executor = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    points = []
    try:
        for snr_index, snr_db in enumerate(cfg.snr_grid_db):
            sigma_n2 = NoiseConfig.from_snr_db(snr_db).sigma_n2
            errors = completed = aborted = dispatched = 0
            while dispatched < cfg.trials:
                take = min(batch, cfg.trials - dispatched)
                for err, comp, abrt in _dispatch(executor, cfg, snr_index, dispatched, take):
                    errors += err
                    completed += comp
                    aborted += abrt
                dispatched += take
                if (
                    cfg.min_bit_errors > 0
                    and errors >= cfg.min_bit_errors
                    and completed * 100 >= cfg.trials
                ):
                    break
            if aborted > ABORT_FAILURE_RATE * (completed + aborted):
                raise SweepError(
                    f"{aborted} of {completed + aborted} trials aborted at "
                    f"snr_db={snr_db:g} ({cfg.scheme})"
                )
            bits = completed * bits_per_trial
            ber = errors / bits if bits else 0.0
            ci = 1.96 * math.sqrt(ber * (1.0 - ber) / bits) if bits else 0.0
            point = BerPoint(
                scheme=cfg.scheme,
                snr_db=snr_db,
                sigma_q2=cfg.beta_error.sigma_q2(sigma_n2),
                trials=completed,
                bits=bits,
                bit_errors=errors,
                ber=ber,
                ci_half_width=ci,
                aborted_trials=aborted,
            )
            points.append(point)
            if progress is not None:
                progress(point)
    finally:
        if executor is not None:
            executor.shutdown()
    return points


def empirical_mse(
    cfg: SimConfig,
    h: np.ndarray,
    u: np.ndarray,
    scheme: str | None = None,
    samples: int = 100000,
    snr_index: int = 0,
    rng: np.random.Generator | None = None,
) -> float:
    """Monte Carlo mean of the squared receive deviation for one fixed frame.

    The frame (precoder, perturbation, beta) is built deterministically from
    ``(h, u)``; only the noise and the relative scaling error ``g`` are
    redrawn, with ``g`` taken from the untruncated Gaussian so the estimate
    targets the closed-form expectation. Serves as the oracle for the analytic
    MSE expressions.
    """
    if samples < 10**4:
        raise ValueError(f"samples must be >= 1e4 for a stable estimate, got {samples}")
    scheme = cfg.scheme if scheme is None else scheme
    const = _constellation(cfg.mod_order)
    sigma_n2 = NoiseConfig.from_snr_db(cfg.snr_grid_db[snr_index]).sigma_n2
    sigma_q2 = cfg.beta_error.sigma_q2(sigma_n2)
    if rng is None:
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.master_seed, spawn_key=(snr_index, 0, 1))
        )

    h = np.asarray(h, dtype=complex)
    ps = _precoder_for(scheme, h, sigma_n2, sigma_q2)
    frame = perturbed_frame(ps, u, const.tau)
    n_r = h.shape[0]
    residual = (h @ ps.matrix - np.eye(n_r)) @ frame.perturbed
    hp_s = h @ (ps.matrix @ frame.perturbed)

    g = rng.normal(0.0, math.sqrt(sigma_q2), size=samples) if sigma_q2 > 0 else np.zeros(samples)
    noise = rng.standard_normal((2, samples, n_r))
    n = math.sqrt(sigma_n2 / 2.0) * (noise[0] + 1j * noise[1])
    d = residual[None, :] - g[:, None] * hp_s[None, :] + ((1.0 - g) * frame.beta)[:, None] * n
    return float(np.mean(np.sum(np.abs(d) ** 2, axis=1)))
