"""Complex dense-matrix utilities used by every other module.

All matrices are ``numpy`` arrays with dtype ``complex128``; vectors are
column matrices. Functions are pure and never mutate their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "SvdFactors",
    "khatri_rao",
    "dft_matrix",
    "truncated_svd",
    "pseudo_inverse",
    "complex_gaussian",
]

# Relative cutoff below which singular values count as zero (pseudo-inverse
# and rank decisions).
RANK_RCOND = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    """Leading singular triplets of a matrix.

    ``left`` is m-by-k with orthonormal columns, ``singular_values`` holds the
    k leading singular values in non-increasing order, ``right`` is n-by-k
    with orthonormal columns. The represented matrix is
    ``left @ diag(singular_values) @ right.conj().T``.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return self.singular_values.size

    def to_dense(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.conj().T


def khatri_rao(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product of ``a`` (B x K) and ``c`` (R x K).

    Column i of the result is ``kron(a[:, i], c[:, i])``, so row-block b of
    ``khatri_rao(v, h) @ w`` equals ``h @ diag(v[b]) @ w``.
    """
    a = np.asarray(a)
    c = np.asarray(c)
    if a.ndim != 2 or c.ndim != 2:
        raise DimensionError("khatri_rao expects 2-D arrays")
    if a.shape[1] != c.shape[1]:
        raise DimensionError(
            f"column counts differ: {a.shape[1]} vs {c.shape[1]}"
        )
    b, k = a.shape
    r = c.shape[0]
    return (a[:, None, :] * c[None, :, :]).reshape(b * r, k)


def dft_matrix(rows: int, cols: int) -> np.ndarray:
    """First ``rows`` rows of the ``cols``-point DFT matrix (unnormalized).

    Entry (b, n) is ``exp(-2j*pi*b*n/cols)``; every entry has unit modulus
    and the full square matrix F satisfies ``F @ F.conj().T = cols * I``.
    """
    if rows < 1 or cols < 1:
        raise DimensionError("rows and cols must be positive")
    if rows > cols:
        raise DimensionError(f"rows ({rows}) must not exceed cols ({cols})")
    grid = np.outer(np.arange(rows), np.arange(cols))
    return np.exp(-2j * np.pi * grid / cols)


def truncated_svd(x: np.ndarray, k: int) -> SvdFactors:
    """Rank-``k`` truncated SVD: the best rank-k Frobenius approximation."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2:
        raise DimensionError("truncated_svd expects a matrix")
    if not 1 <= k <= min(x.shape):
        raise DimensionError(
            f"rank k={k} out of range for a {x.shape[0]}x{x.shape[1]} matrix"
        )
    u, s, vh = np.linalg.svd(x, full_matrices=False)
    return SvdFactors(u[:, :k], s[:k], vh[:k].conj().T)


def pseudo_inverse(x: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with singular values below
    ``RANK_RCOND * sigma_max`` treated as zero."""
    x = np.asarray(x, dtype=complex)
    return np.linalg.pinv(x, rcond=RANK_RCOND)


def complex_gaussian(
    rows: int, cols: int, variance: float, rng: np.random.Generator
) -> np.ndarray:
    """i.i.d. circularly symmetric complex Gaussian matrix.

    Each entry has total variance ``variance`` (real and imaginary parts
    carry ``variance / 2`` each).
    """
    if variance < 0:
        raise ParameterError(f"variance must be nonnegative, got {variance}")
    scale = np.sqrt(variance / 2.0)
    return scale * (
        rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    )
