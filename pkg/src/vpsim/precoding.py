"""Precoder construction and the transmit-side math shared by all schemes.

Three schemes build on one regularized channel inversion,
``P = H^H (H H^H + alpha I)^(-1)``:

* ``cvp``       -- plain channel inversion, ``alpha = 0``
* ``mmse-vp``   -- ``alpha = N_r * sigma_n^2``
* ``robust-vp`` -- ``alpha = N_r * (sigma_q^2 + sigma_n^2 (1 + sigma_q^2))``,
  accounting for a Gaussian relative error on the power scaling factor the
  receivers use.

Every scheme shares one perturbation search: a triangular factor ``L`` with
``L^H L = (H H^H + alpha I)^(-1)`` turns the quadratic form into
``||L (u + u')||^2``, which the lattice module minimizes. For ``alpha = 0``
this equals ``||P (u + u')||^2``, the unscaled transmit power.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .lattice import LatticeProblem, PerturbationSolution, sphere_decode

SCHEMES = ("cvp", "mmse-vp", "robust-vp")

COND_LIMIT = 1e12


class SingularChannelError(ValueError):
    """Channel Gram matrix too ill-conditioned to invert; caller should redraw."""


@lru_cache(maxsize=8)
def _eye(n: int) -> np.ndarray:
    ident = np.eye(n, dtype=complex)
    ident.setflags(write=False)
    return ident


@dataclass(frozen=True)
class PrecoderSet:
    """Precoding matrix plus the triangular factor driving the lattice search.

    ``factor`` is lower triangular with positive real diagonal and satisfies
    ``factor^H factor = (H H^H + alpha I)^(-1)``.
    """

    matrix: np.ndarray
    alpha: float
    factor: np.ndarray
    scheme: str


@dataclass(frozen=True)
class PerturbedFrame:
    """One precoded data vector: ``perturbed = data + perturbation``,
    ``transmit = P @ perturbed / beta`` with ``beta`` restoring unit norm."""

    data: np.ndarray
    perturbation: np.ndarray
    perturbed: np.ndarray
    beta: float
    transmit: np.ndarray


def triangular_factor(a: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with positive real diagonal and ``L^H L = a^(-1)``.

    ``a`` must be Hermitian positive definite; the factor is the inverse of its
    Cholesky factor, so ``||L s||^2 = s^H a^(-1) s`` for every vector ``s``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    asym = np.abs(a - a.conj().T).max()
    if asym > 1e-10 * max(1.0, np.abs(a).max()):
        raise ValueError("matrix is not Hermitian")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    return scipy.linalg.solve_triangular(chol, _eye(a.shape[0]), lower=True)


def _inversion_set(h: np.ndarray, alpha: float, scheme: str) -> PrecoderSet:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2:
        raise ValueError(f"channel matrix must be 2-D, got shape {h.shape}")
    n_r, n_t = h.shape
    if n_r > n_t:
        raise ValueError(f"need N_r <= N_t, got {n_r}x{n_t}")
    if not np.isfinite(h).all():
        raise ValueError("channel matrix must be finite")
    gram = h @ h.conj().T + alpha * _eye(n_r)
    eigs = np.linalg.eigvalsh(gram)  # Hermitian: condition estimate from the spectrum
    if eigs[0] <= 0 or eigs[-1] > COND_LIMIT * eigs[0]:
        raise SingularChannelError(
            f"condition number of H H^H + alpha I exceeds {COND_LIMIT:g}"
        )
    matrix = np.linalg.solve(gram, h).conj().T
    return PrecoderSet(matrix=matrix, alpha=alpha, factor=triangular_factor(gram), scheme=scheme)


def zf_precoder(h: np.ndarray) -> PrecoderSet:
    """Channel inversion ``P = H^H (H H^H)^(-1)``; requires full row rank."""
    return _inversion_set(h, 0.0, "cvp")


def mmse_precoder(h: np.ndarray, sigma_n2: float, n_users: int | None = None) -> PrecoderSet:
    """Regularized inversion with ``alpha = N_r * sigma_n2``."""
    if sigma_n2 < 0:
        raise ValueError(f"sigma_n2 must be >= 0, got {sigma_n2!r}")
    n_r = _check_users(h, n_users)
    alpha = n_r * sigma_n2
    if alpha == 0.0:
        return zf_precoder(h)
    return _inversion_set(h, alpha, "mmse-vp")


def robust_precoder(
    h: np.ndarray, sigma_n2: float, sigma_q2: float, n_users: int | None = None
) -> PrecoderSet:
    """Regularized inversion tolerating receiver scaling error of variance ``sigma_q2``.

    The effective regularization is ``N_r * (sigma_q2 + sigma_n2 * (1 + sigma_q2))``,
    which reduces to the MMSE precoder at ``sigma_q2 = 0``.
    """
    if sigma_n2 < 0 or sigma_q2 < 0:
        raise ValueError("sigma_n2 and sigma_q2 must be >= 0")
    n_r = _check_users(h, n_users)
    alpha = n_r * (sigma_q2 + sigma_n2 * (1.0 + sigma_q2))
    if alpha == 0.0:
        return zf_precoder(h)
    return _inversion_set(h, alpha, "robust-vp")


def _check_users(h: np.ndarray, n_users: int | None) -> int:
    n_r = np.asarray(h).shape[0]
    if n_users is not None and n_users != n_r:
        raise ValueError(f"n_users={n_users} does not match channel rows {n_r}")
    return n_r


def solve_perturbation(ps: PrecoderSet, u: np.ndarray, tau: float) -> PerturbationSolution:
    """Minimum of ``||L (u + u')||^2`` over the scaled Gaussian-integer lattice."""
    return sphere_decode(LatticeProblem(generator=ps.factor, target=u, tau=tau))


def form_transmit(ps: PrecoderSet, s: np.ndarray) -> tuple[float, np.ndarray]:
    """Scale ``P @ s`` to unit transmit power; returns ``(beta, x)`` with ``beta = ||P s||``."""
    s = np.asarray(s, dtype=complex)
    if not s.any():
        raise ValueError("perturbed vector s must be nonzero")
    v = ps.matrix @ s
    beta = float(np.linalg.norm(v))
    if not (beta > 0 and np.isfinite(beta)):
        raise ValueError("degenerate frame: P @ s vanished")
    return beta, v / beta


def perturbed_frame(ps: PrecoderSet, u: np.ndarray, tau: float) -> PerturbedFrame:
    """Run the perturbation search and power normalization for one data vector."""
    u = np.asarray(u, dtype=complex)
    sol = solve_perturbation(ps, u, tau)
    s = u + sol.perturbation
    beta, x = form_transmit(ps, s)
    return PerturbedFrame(data=u, perturbation=sol.perturbation, perturbed=s, beta=beta, transmit=x)


def analytic_mse(
    ps: PrecoderSet,
    h: np.ndarray,
    s: np.ndarray,
    beta: float,
    sigma_n2: float,
    sigma_q2: float = 0.0,
) -> float:
    """Closed-form mean square error of the scaled receive vector.

    With an error-free scaling factor this is
    ``||(HP - I)s||^2 + N_r beta^2 sigma_n2``; with a relative scaling error of
    variance ``sigma_q2`` the noise term becomes
    ``N_r beta^2 (sigma_q2 + sigma_n2 (1 + sigma_q2))``.
    """
    h = np.asarray(h, dtype=complex)
    n_r = h.shape[0]
    residual = (h @ ps.matrix - np.eye(n_r)) @ s
    interference = float(np.real(np.vdot(residual, residual)))
    if sigma_q2 == 0.0:
        return interference + n_r * beta**2 * sigma_n2
    return interference + n_r * beta**2 * (sigma_q2 + sigma_n2 * (1.0 + sigma_q2))
