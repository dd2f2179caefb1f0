"""Closest-point search over the scaled Gaussian-integer lattice.

Solves ``argmin ||L (u + u')||^2`` with ``u'`` ranging over ``tau * (Z + jZ)^N``
for a triangular complex generator ``L``. The production path is an exact
depth-first sphere search; an exhaustive enumerator is provided as an
independent cross-check for small problems.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

_DIAG_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class LatticeProblem:
    """Search instance: triangular ``generator``, complex ``target``, lattice scale ``tau``."""

    generator: np.ndarray
    target: np.ndarray
    tau: float
    upper: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gen = np.asarray(self.generator, dtype=complex)
        tgt = np.asarray(self.target, dtype=complex).reshape(-1)
        if gen.ndim != 2 or gen.shape[0] != gen.shape[1]:
            raise ValueError(f"generator must be square, got shape {gen.shape}")
        n = gen.shape[0]
        if n < 1 or tgt.shape[0] != n:
            raise ValueError("target length must match generator dimension (N >= 1)")
        if not (np.isfinite(gen).all() and np.isfinite(tgt).all()):
            raise ValueError("generator and target must be finite")
        if not (self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        diag = np.diagonal(gen)
        scale = np.abs(diag.real)
        if not (diag.real > 0).all() or (np.abs(diag.imag) > _DIAG_IMAG_TOL * np.maximum(scale, 1.0)).any():
            raise ValueError("generator diagonal must be real and strictly positive")
        is_upper = not any(gen[i, j] for i in range(1, n) for j in range(i))
        if not is_upper and any(gen[i, j] for j in range(1, n) for i in range(j)):
            raise ValueError("generator must be upper or lower triangular")
        object.__setattr__(self, "generator", gen)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "upper", is_upper)


@dataclass(frozen=True)
class PerturbationSolution:
    """Optimal lattice shift and its objective value ``||L (u + perturbation)||^2``."""

    perturbation: np.ndarray
    metric: float


def _real_embedding(gen: np.ndarray, tgt: np.ndarray):
    """Interleaved real form: coordinate 2i is Re of entry i, 2i+1 is Im.

    For upper-triangular complex ``gen`` with real diagonal the embedded matrix
    is upper triangular as well, so the enumeration can run directly on it.
    """
    n = gen.shape[0]
    r = np.zeros((2 * n, 2 * n))
    r[0::2, 0::2] = gen.real
    r[0::2, 1::2] = -gen.imag
    r[1::2, 0::2] = gen.imag
    r[1::2, 1::2] = gen.real
    t = np.empty(2 * n)
    t[0::2] = tgt.real
    t[1::2] = tgt.imag
    return r, t


def _enumerate_closest(rows, t, tau: float):
    """Schnorr-Euchner search for ``argmin ||R (t + tau z)||^2`` over integer z.

    ``rows`` is an upper-triangular real matrix with positive diagonal, as
    nested lists. Children at each level are visited closest-first around the
    continuous minimizer, the first leaf reached is the Babai point (which
    seeds the radius), and the radius only shrinks on a strict improvement so
    the first solution found at the optimal metric is kept.
    """
    n = len(t)
    acc = [0.0] * (n + 1)  # acc[k+1] = cost contributed by levels k+1 .. n-1
    zeta = [0.0] * n
    z = [0] * n
    step = [0] * n
    dscale = [(rows[k][k] * tau) ** 2 for k in range(n)]
    best_z = None
    best = math.inf

    def enter(k: int) -> None:
        rk = rows[k]
        inner = 0.0
        for j in range(k + 1, n):
            inner += rk[j] * (t[j] + tau * z[j])
        zk = (-inner / rk[k] - t[k]) / tau
        zeta[k] = zk
        zi = math.floor(zk + 0.5)
        z[k] = zi
        step[k] = 1 if zk >= zi else -1

    k = n - 1
    enter(k)
    while True:
        d = acc[k + 1] + dscale[k] * (z[k] - zeta[k]) ** 2
        if d < best:
            if k == 0:
                best = d
                best_z = z.copy()
                z[0] += step[0]
                step[0] = -step[0] - (1 if step[0] > 0 else -1)
            else:
                acc[k] = d
                k -= 1
                enter(k)
        else:
            # siblings are visited in nondecreasing cost: this level is exhausted
            k += 1
            if k == n:
                return best_z, best
            z[k] += step[k]
            step[k] = -step[k] - (1 if step[k] > 0 else -1)


def _flip(a: np.ndarray) -> np.ndarray:
    return a[::-1, ::-1] if a.ndim == 2 else a[::-1]


def _evaluate(gen: np.ndarray, tgt: np.ndarray, perturbation: np.ndarray) -> float:
    v = gen @ (tgt + perturbation)
    return float(np.real(np.vdot(v, v)))


def sphere_decode(p: LatticeProblem) -> PerturbationSolution:
    """Exact minimizer of ``||L (u + u')||^2`` over ``u'`` in ``tau*(Z+jZ)^N``."""
    gen, tgt, tau = p.generator, p.target, p.tau
    flipped = False
    if not p.upper:
        # lower-triangular generators are solved in reversed coordinate order
        gen, tgt, flipped = _flip(gen), _flip(tgt), True
    rows_mat, t = _real_embedding(gen, tgt)
    rows = rows_mat.tolist()
    z, _ = _enumerate_closest(rows, t.tolist(), tau)
    coeffs = np.asarray(z, dtype=float)
    perturbation = tau * (coeffs[0::2] + 1j * coeffs[1::2])
    if flipped:
        perturbation = _flip(perturbation)
    return PerturbationSolution(
        perturbation=perturbation,
        metric=_evaluate(p.generator, p.target, perturbation),
    )


def brute_force_perturbation(p: LatticeProblem, coeff_bound: int = 2) -> PerturbationSolution:
    """Exhaustive reference search over per-axis coefficients in [-coeff_bound, coeff_bound].

    Test oracle only: limited to N <= 3. Ties are broken by lexicographic order
    on the interleaved coefficient tuple (re_0, im_0, re_1, im_1, ...).
    """
    n = p.target.shape[0]
    if n > 3:
        raise ValueError(f"exhaustive search is limited to N <= 3, got N={n}")
    if coeff_bound < 1:
        raise ValueError(f"coeff_bound must be >= 1, got {coeff_bound}")
    grid = range(-coeff_bound, coeff_bound + 1)
    cand = np.array(list(itertools.product(grid, repeat=2 * n)), dtype=float)
    shifts = p.tau * (cand[:, 0::2] + 1j * cand[:, 1::2])
    v = p.generator @ (p.target[:, None] + shifts.T)
    metrics = np.sum(np.abs(v) ** 2, axis=0)
    idx = int(np.argmin(metrics))  # first minimum = lexicographically smallest tuple
    return PerturbationSolution(perturbation=shifts[idx], metric=float(metrics[idx]))
