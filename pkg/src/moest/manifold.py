"""Embedded geometry of the complex fixed-rank matrix manifold.

Points are stored in factored SVD form (U, s, V); tangent vectors at a
point are stored as (M, U_p, V_p) with dense form
U @ M @ V^H + U_p @ V^H + U @ V_p^H and the null-space conditions
U_p^H U = 0, V_p^H V = 0. All correctness-critical identities are phrased
on dense forms; the factored representations exist for speed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRankError, DimensionError
from .linalg import SvdFactors, complex_gaussian

__all__ = [
    "FixedRankPoint",
    "TangentVector",
    "from_dense",
    "inner",
    "project",
    "retract",
    "transport",
    "random_point",
]

logger = logging.getLogger(__name__)

# Singular value k counts as numerically zero below this multiple of
# sigma_max * max(m, n); machine-precision scale so that the 1e-12-norm
# degeneracy perturbation in `retract` stays detectable as full rank.
_DEGENERATE_RTOL = np.finfo(float).eps


def _is_degenerate(s: np.ndarray, k: int, ambient: int) -> bool:
    return s[0] == 0.0 or s[k - 1] <= ambient * _DEGENERATE_RTOL * s[0]


@dataclass(frozen=True)
class FixedRankPoint:
    """A rank-k matrix on the fixed-rank manifold, in factored SVD form."""

    factors: SvdFactors

    @property
    def shape(self) -> tuple[int, int]:
        return (self.factors.left.shape[0], self.factors.right.shape[0])

    @property
    def rank(self) -> int:
        return self.factors.rank

    @property
    def u(self) -> np.ndarray:
        return self.factors.left

    @property
    def s(self) -> np.ndarray:
        return self.factors.singular_values

    @property
    def v(self) -> np.ndarray:
        return self.factors.right

    def to_dense(self) -> np.ndarray:
        return self.factors.to_dense()

    def norm(self) -> float:
        return float(np.linalg.norm(self.s))


@dataclass(frozen=True)
class TangentVector:
    """Element of the tangent space at ``base`` in factored form."""

    base: FixedRankPoint
    m: np.ndarray  # (k, k) core
    up: np.ndarray  # (rows, k), columns orthogonal to base.u
    vp: np.ndarray  # (cols, k), columns orthogonal to base.v

    def to_dense(self) -> np.ndarray:
        u, v = self.base.u, self.base.v
        return u @ self.m @ v.conj().T + self.up @ v.conj().T + u @ self.vp.conj().T

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self)))

    def __neg__(self) -> "TangentVector":
        return TangentVector(self.base, -self.m, -self.up, -self.vp)

    def __mul__(self, scalar: float) -> "TangentVector":
        return TangentVector(self.base, scalar * self.m, scalar * self.up, scalar * self.vp)

    __rmul__ = __mul__

    def __add__(self, other: "TangentVector") -> "TangentVector":
        if other.base is not self.base:
            raise DimensionError("tangent vectors must share the same base point")
        return TangentVector(
            self.base, self.m + other.m, self.up + other.up, self.vp + other.vp
        )

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        return self + (-other)


def from_dense(x: np.ndarray, k: int) -> FixedRankPoint:
    """Best rank-``k`` approximation of ``x`` as a manifold point.

    Raises DegenerateRankError when ``x`` has fewer than k numerically
    nonzero singular values (machine-precision relative cutoff).
    """
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2:
        raise DimensionError("expected a matrix")
    if not 1 <= k <= min(x.shape):
        raise DimensionError(f"rank k={k} out of range for shape {x.shape}")
    u, s, vh = np.linalg.svd(x, full_matrices=False)
    if _is_degenerate(s, k, max(x.shape)):
        raise DegenerateRankError(
            f"matrix has fewer than {k} numerically nonzero singular values"
        )
    return FixedRankPoint(SvdFactors(u[:, :k], s[:k], vh[:k].conj().T))


def inner(xi, eta) -> float:
    """Riemannian inner product Re tr(xi^H eta).

    Accepts tangent vectors (same base) or dense matrices in any mix;
    the factored evaluation for same-base tangent vectors matches the
    dense-form trace.
    """
    if isinstance(xi, TangentVector) and isinstance(eta, TangentVector) and xi.base is eta.base:
        return float(
            np.vdot(xi.m, eta.m).real
            + np.vdot(xi.up, eta.up).real
            + np.vdot(xi.vp, eta.vp).real
        )
    a = xi.to_dense() if isinstance(xi, TangentVector) else np.asarray(xi)
    b = eta.to_dense() if isinstance(eta, TangentVector) else np.asarray(eta)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b).real)


def project(x: FixedRankPoint, j: np.ndarray) -> TangentVector:
    """Orthogonal projection of an ambient matrix onto the tangent space at x.

    Dense form: P_U J P_V + (I - P_U) J P_V + P_U J (I - P_V) with
    P_U = U U^H and P_V = V V^H.
    """
    j = np.asarray(j, dtype=complex)
    if j.shape != x.shape:
        raise DimensionError(f"ambient shape {j.shape} does not match point {x.shape}")
    u, v = x.u, x.v
    jv = j @ v  # (rows, k)
    jhu = j.conj().T @ u  # (cols, k)
    m = u.conj().T @ jv
    up = jv - u @ m
    vp = jhu - v @ m.conj().T
    return TangentVector(x, m, up, vp)


def transport(x_new: FixedRankPoint, xi_old: TangentVector) -> TangentVector:
    """Move a tangent vector to the tangent space of another point."""
    if xi_old.base.shape != x_new.shape:
        raise DimensionError(
            f"ambient shapes differ: {xi_old.base.shape} vs {x_new.shape}"
        )
    return project(x_new, xi_old.to_dense())


def _retract_factored(
    x: FixedRankPoint, xi: TangentVector, step: float
) -> FixedRankPoint:
    """Truncated SVD of x + step*xi via a reduced (2k x 2k) core SVD.

    x + step*xi = [U Q_u] K [V Q_v]^H with Q_u, Q_v orthonormal bases of
    the U_p / V_p ranges, so the update's singular triplets come from the
    small core K. Falls back (DimensionError) when a rank-deficient U_p or
    V_p leaves [U Q_u] non-orthonormal.
    """
    k = x.rank
    qu, ru = np.linalg.qr(xi.up)
    qv, rv = np.linalg.qr(xi.vp)
    if (
        np.abs(qu.conj().T @ x.u).max() > 1e-8
        or np.abs(qv.conj().T @ x.v).max() > 1e-8
    ):
        raise DimensionError("factored basis lost orthogonality")
    core = np.zeros((2 * k, 2 * k), dtype=complex)
    core[:k, :k] = np.diag(x.s) + step * xi.m
    core[:k, k:] = step * rv.conj().T
    core[k:, :k] = step * ru
    cu, cs, cvh = np.linalg.svd(core)
    if _is_degenerate(cs, k, max(x.shape)):
        raise DegenerateRankError("update has fewer than k nonzero singular values")
    left = np.hstack([x.u, qu]) @ cu[:, :k]
    right = np.hstack([x.v, qv]) @ cvh[:k].conj().T
    return FixedRankPoint(SvdFactors(left, cs[:k], right))


def retract(x: FixedRankPoint, xi: TangentVector, step: float) -> FixedRankPoint:
    """Map x + step*xi back to the manifold by rank-k truncated SVD.

    A degenerate update (rank below k) is retried once after adding a
    random tangent perturbation of norm 1e-12 * ||x||.
    """
    if xi.base is not x:
        raise DimensionError("tangent vector is not anchored at the point")
    k = x.rank
    try:
        if 2 * k < min(x.shape):
            try:
                return _retract_factored(x, xi, step)
            except DimensionError:
                pass  # degenerate basis; the dense path handles it
        return from_dense(x.to_dense() + step * xi.to_dense(), k)
    except DegenerateRankError:
        pass
    logger.warning(
        "degenerate rank-%d retraction; retrying with 1e-12-scale perturbation", k
    )
    noise = project(x, complex_gaussian(*x.shape, 1.0, np.random.default_rng(0)))
    noise_norm = noise.norm()
    if noise_norm == 0.0:
        raise DegenerateRankError("cannot perturb a zero tangent space")
    update = x.to_dense() + step * xi.to_dense()
    update += (1e-12 * x.norm() / noise_norm) * noise.to_dense()
    try:
        return from_dense(update, k)
    except DegenerateRankError as exc:
        raise DegenerateRankError(
            f"rank-{k} retraction still degenerate after perturbation"
        ) from exc


def random_point(
    m: int, n: int, k: int, rng: np.random.Generator
) -> FixedRankPoint:
    """Random rank-k point with unit Frobenius norm.

    Built from a product of two i.i.d. complex Gaussian factors; a
    (measure-zero) degenerate draw is retried.
    """
    if not 1 <= k <= min(m, n):
        raise DimensionError(f"rank k={k} out of range for {m}x{n}")
    for _ in range(5):
        x = complex_gaussian(m, k, 1.0, rng) @ complex_gaussian(k, n, 1.0, rng)
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        try:
            return from_dense(x / norm, k)
        except DegenerateRankError:
            continue
    raise DegenerateRankError("could not draw a full-rank random point")
