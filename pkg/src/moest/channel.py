"""Sparse multipath channel synthesis for planar antenna arrays.

Channels are sums of rank-one outer products of array steering vectors
weighted by complex path gains, so a C-path channel between sufficiently
large arrays has rank exactly C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .linalg import complex_gaussian

__all__ = [
    "ArrayGeometry",
    "PathSet",
    "upa_response",
    "sample_paths",
    "synthesize_channel",
    "numerical_rank",
]

# Per-path gain variances: unit power on the line-of-sight path, -5 dB on
# the remaining scattered paths.
LOS_GAIN_VARIANCE = 1.0
NLOS_GAIN_VARIANCE = 10.0 ** (-0.5)


@dataclass(frozen=True)
class ArrayGeometry:
    """Half-wavelength-spaced uniform planar array with an M x N grid."""

    horizontal_count: int  # M
    vertical_count: int  # N

    def __post_init__(self):
        if self.horizontal_count < 1 or self.vertical_count < 1:
            raise ParameterError("array grid dimensions must be positive")

    @property
    def size(self) -> int:
        return self.horizontal_count * self.vertical_count

    @classmethod
    def near_square(cls, total: int) -> "ArrayGeometry":
        """Most-square M x N factorization of ``total`` with M <= N."""
        if total < 1:
            raise ParameterError("array size must be positive")
        m = int(np.sqrt(total))
        while total % m:
            m -= 1
        return cls(m, total // m)


@dataclass(frozen=True)
class PathSet:
    """Sampled multipath parameters (gains and angle pairs) for one channel.

    All arrays have length C. Azimuth angles lie in [0, pi], elevation
    angles in [-pi/2, pi/2]; index 0 is the line-of-sight path.
    """

    gains: np.ndarray
    aoa_azimuth: np.ndarray
    aoa_elevation: np.ndarray
    aod_azimuth: np.ndarray
    aod_elevation: np.ndarray

    def __post_init__(self):
        n = self.gains.size
        for name in ("aoa_azimuth", "aoa_elevation", "aod_azimuth", "aod_elevation"):
            if getattr(self, name).size != n:
                raise DimensionError(f"{name} length does not match gains ({n})")

    @property
    def count(self) -> int:
        return self.gains.size


def upa_response(geometry: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-norm steering vector of a planar array, as an (M*N, 1) column.

    Element (m, n) carries phase pi * (n*sin(az)*sin(el) + m*cos(el));
    entries are ordered lexicographically in (m, n) with n varying fastest.
    """
    if not (np.isfinite(azimuth) and np.isfinite(elevation)):
        raise ParameterError("angles must be finite")
    m_count, n_count = geometry.horizontal_count, geometry.vertical_count
    m = np.arange(m_count)[:, None]  # (M, 1)
    n = np.arange(n_count)[None, :]  # (1, N)
    phase = np.pi * (n * np.sin(azimuth) * np.sin(elevation) + m * np.cos(elevation))
    vec = np.exp(1j * phase).reshape(-1, 1) / np.sqrt(geometry.size)
    return vec


def sample_paths(count: int, rng: np.random.Generator) -> PathSet:
    """Draw C multipath components with random gains and angles.

    Gain 0 (line of sight) has unit variance, the rest have variance
    10^-0.5; azimuths are uniform on [0, pi] and elevations on
    [-pi/2, pi/2].
    """
    if count < 1:
        raise ParameterError(f"path count must be >= 1, got {count}")
    gains = np.empty(count, dtype=complex)
    gains[:1] = complex_gaussian(1, 1, LOS_GAIN_VARIANCE, rng).ravel()
    if count > 1:
        gains[1:] = complex_gaussian(count - 1, 1, NLOS_GAIN_VARIANCE, rng).ravel()
    return PathSet(
        gains=gains,
        aoa_azimuth=rng.uniform(0.0, np.pi, count),
        aoa_elevation=rng.uniform(-np.pi / 2, np.pi / 2, count),
        aod_azimuth=rng.uniform(0.0, np.pi, count),
        aod_elevation=rng.uniform(-np.pi / 2, np.pi / 2, count),
    )


def synthesize_channel(
    paths: PathSet, rx: ArrayGeometry, tx: ArrayGeometry
) -> np.ndarray:
    """Sum-of-paths channel matrix between two planar arrays.

    Returns sqrt(N_rx * N_tx / C) * sum_c gain_c * a_rx(c) @ a_tx(c)^H,
    shape (rx.size, tx.size).
    """
    c = paths.count
    h = np.zeros((rx.size, tx.size), dtype=complex)
    for i in range(c):
        a_rx = upa_response(rx, paths.aoa_azimuth[i], paths.aoa_elevation[i])
        a_tx = upa_response(tx, paths.aod_azimuth[i], paths.aod_elevation[i])
        h += paths.gains[i] * (a_rx @ a_tx.conj().T)
    return np.sqrt(rx.size * tx.size / c) * h


def numerical_rank(x: np.ndarray, rel_tol: float) -> int:
    """Number of singular values exceeding ``rel_tol`` times the largest."""
    if not 0 < rel_tol < 1:
        raise ParameterError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    s = np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))
