"""Square-QAM constellations, Gray bit mapping, and the complex modulo operator.

Constellations live on the odd-integer grid (spacing 2, no unit-energy
normalization); transmit power is absorbed by the power scaling factor of the
precoding stage, and the modulo period ``tau`` is tied to the grid so that the
perturbation lattice is transparent to the receiver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class Constellation:
    """Square QAM alphabet on the odd-integer grid.

    ``points[v]`` is the constellation point whose Gray bit label has integer
    value ``v`` (first half of the bits selects the real axis, second half the
    imaginary axis, MSB first).
    """

    order: int
    points: np.ndarray
    delta: float
    c_max: float
    tau: float
    bits_per_symbol: int


def _axis_levels(levels_per_axis: int) -> np.ndarray:
    # odd integers -(m-1), ..., m-1, ascending
    return 2.0 * np.arange(levels_per_axis) - (levels_per_axis - 1)


def _gray(i: np.ndarray) -> np.ndarray:
    return i ^ (i >> 1)


def make_constellation(order: int) -> Constellation:
    """Build the square QAM constellation with per-axis Gray labeling.

    Supported orders are 4, 16 and 64. The grid spacing is 2, the largest
    per-axis coordinate is ``sqrt(order) - 1`` and the modulo period is
    ``tau = 2 * (c_max + delta / 2)``.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order!r}; expected one of {SUPPORTED_ORDERS}")
    m = int(round(np.sqrt(order)))
    bits_per_axis = m.bit_length() - 1
    levels = _axis_levels(m)
    idx = np.arange(m)
    gray_to_index = np.empty(m, dtype=np.int64)
    gray_to_index[_gray(idx)] = idx

    labels = np.arange(order)
    re_label = labels >> bits_per_axis
    im_label = labels & (m - 1)
    points = levels[gray_to_index[re_label]] + 1j * levels[gray_to_index[im_label]]
    points.setflags(write=False)

    delta = 2.0
    c_max = float(m - 1)
    return Constellation(
        order=order,
        points=points,
        delta=delta,
        c_max=c_max,
        tau=2.0 * (c_max + delta / 2.0),
        bits_per_symbol=2 * bits_per_axis,
    )


@lru_cache(maxsize=8)
def _msb_first_shifts(width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    shifts.setflags(write=False)
    return shifts


def map_bits(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Map a bit sequence to constellation symbols, ``bits_per_symbol`` bits each."""
    bits = np.asarray(bits)
    if bits.size % c.bits_per_symbol != 0:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of bits_per_symbol={c.bits_per_symbol}"
        )
    if bits.size and not ((bits == 0) | (bits == 1)).all():
        raise ValueError("bits must contain only 0 and 1")
    groups = bits.astype(np.int64).reshape(-1, c.bits_per_symbol)
    weights = 1 << _msb_first_shifts(c.bits_per_symbol)
    return c.points[groups @ weights]


def demap(symbols: np.ndarray, c: Constellation) -> np.ndarray:
    """Slice symbols to the nearest constellation point and return its bit label.

    Nearest is Euclidean; exact midpoint ties resolve per axis to the smaller
    coordinate (smaller Re, then smaller Im), which keeps the decision
    deterministic.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if not np.isfinite(symbols).all():
        raise ValueError("symbols must be finite")
    m = int(round(np.sqrt(c.order)))
    bits_per_axis = c.bits_per_symbol // 2

    flat = symbols.ravel()
    coords = np.empty((flat.size, 2))
    coords[:, 0] = flat.real
    coords[:, 1] = flat.imag
    # index of the nearest level; ceil() sends exact midpoints to the lower level
    idx = np.ceil((coords + c.c_max) / c.delta - 0.5).astype(np.int64)
    idx = np.minimum(np.maximum(idx, 0), m - 1)
    gray = idx ^ (idx >> 1)
    # (symbol, axis, bit) -> flat as [re bits, im bits] per symbol
    bits = (gray[:, :, None] >> _msb_first_shifts(bits_per_axis)) & 1
    return bits.reshape(-1)


def modulo(a, tau: float):
    """Wrap a complex value into the region [-tau/2, tau/2) on each axis.

    Implements ``a - floor(Re(a)/tau + 1/2)*tau - 1j*floor(Im(a)/tau + 1/2)*tau``;
    the floor form makes the region half-open (``+tau/2`` wraps, ``-tau/2`` is
    kept). Accepts scalars or arrays.
    """
    if not (tau > 0):
        raise ValueError(f"tau must be positive, got {tau!r}")
    arr = np.asarray(a, dtype=complex)
    if not np.isfinite(arr).all():
        raise ValueError("modulo input must be finite")
    out = (
        arr
        - np.floor(arr.real / tau + 0.5) * tau
        - 1j * np.floor(arr.imag / tau + 0.5) * tau
    )
    if np.isscalar(a) or getattr(a, "ndim", 0) == 0:
        return complex(out)
    return out
