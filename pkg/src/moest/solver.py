"""Riemannian conjugate gradient for fixed-rank least squares.

Minimizes ||Y - A @ H||_F^2 (or ||Y - A @ H^T||_F^2 when the unknown
enters transposed) over the manifold of fixed-rank matrices: project the
Euclidean gradient to the tangent space, build a Polak-Ribiere conjugate
direction with vector transport, take an Armijo backtracking step, and
retract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError, StallError
from .manifold import FixedRankPoint, TangentVector, inner, project, retract, transport

__all__ = [
    "LeastSquaresProblem",
    "ArmijoConfig",
    "CgMoConfig",
    "SolveTrace",
    "objective",
    "euclidean_grad_hp",
    "euclidean_grad_hr",
    "riemannian_grad",
    "polak_ribiere_beta",
    "armijo_step",
    "cg_mo_solve",
]


class LeastSquaresProblem:
    """One matrix least-squares subproblem with cached Gram products.

    ``design`` is the stacked regression matrix A, ``target`` the stacked
    observations Y. With ``transposed_unknown`` set, candidates enter the
    residual as H^T (the unknown is kept in its natural orientation and the
    objective reads ||Y - A @ H^T||_F^2).
    """

    def __init__(
        self, design: np.ndarray, target: np.ndarray, transposed_unknown: bool = False
    ):
        design = np.asarray(design, dtype=complex)
        target = np.asarray(target, dtype=complex)
        if design.ndim != 2 or target.ndim != 2:
            raise DimensionError("design and target must be matrices")
        if design.shape[0] != target.shape[0]:
            raise DimensionError(
                f"row counts differ: design {design.shape[0]} vs target {target.shape[0]}"
            )
        self.design = design
        self.target = target
        self.transposed_unknown = transposed_unknown
        # Gram caches make repeated objective/gradient evaluations O(k^2 n)
        # instead of O(rows k n): f = ||Y||^2 - 2 Re tr(H^H A^H Y) + tr(H^H A^H A H).
        self._gram = design.conj().T @ design
        self._cross = design.conj().T @ target
        self._target_norm2 = float(np.vdot(target, target).real)

    @property
    def unknown_shape(self) -> tuple[int, int]:
        if self.transposed_unknown:
            return (self.target.shape[1], self.design.shape[1])
        return (self.design.shape[1], self.target.shape[1])

    def _check(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=complex)
        if h.shape != self.unknown_shape:
            raise DimensionError(
                f"unknown shape {h.shape}, expected {self.unknown_shape}"
            )
        return h

    def value(self, h: np.ndarray) -> float:
        """Objective via the cached Gram form (equivalent up to roundoff)."""
        h = self._check(h)
        if self.transposed_unknown:
            cross = np.vdot(h, self._cross.T)
            quad = np.vdot(h, h @ self._gram.T)
        else:
            cross = np.vdot(h, self._cross)
            quad = np.vdot(h, self._gram @ h)
        return float(max(self._target_norm2 - 2.0 * cross.real + quad.real, 0.0))

    def gradient(self, h: np.ndarray) -> np.ndarray:
        """Euclidean (conjugate-cogradient) matrix at ``h``."""
        h = self._check(h)
        if self.transposed_unknown:
            return h @ self._gram.T - self._cross.T
        return self._gram @ h - self._cross


def objective(problem: LeastSquaresProblem, h: np.ndarray) -> float:
    """Residual objective ||Y - A h||_F^2 (h transposed when configured)."""
    h = problem._check(h)
    candidate = h.T if problem.transposed_unknown else h
    residual = problem.target - problem.design @ candidate
    return float(np.vdot(residual, residual).real)


def euclidean_grad_hp(problem: LeastSquaresProblem, hp: np.ndarray) -> np.ndarray:
    """Gradient A^H (A hp - Y) for the natural-orientation unknown."""
    if problem.transposed_unknown:
        raise ParameterError("problem has a transposed unknown; use euclidean_grad_hr")
    return problem.gradient(hp)


def euclidean_grad_hr(problem: LeastSquaresProblem, hr: np.ndarray) -> np.ndarray:
    """Gradient (hr A^T - Y^T) A^* for the transposed unknown."""
    if not problem.transposed_unknown:
        raise ParameterError("problem has a natural unknown; use euclidean_grad_hp")
    return problem.gradient(hr)


def riemannian_grad(x: FixedRankPoint, g_euclidean: np.ndarray) -> TangentVector:
    """Tangent-space projection of the Euclidean gradient."""
    return project(x, g_euclidean)


def polak_ribiere_beta(
    grad_now: TangentVector,
    grad_prev_transported: TangentVector,
    grad_prev_norm2: float,
) -> float:
    """Nonnegative Polak-Ribiere coefficient (PR+ variant)."""
    if grad_prev_norm2 <= 0.0:
        raise ParameterError("previous gradient norm must be positive")
    return max(0.0, inner(grad_now, grad_now - grad_prev_transported) / grad_prev_norm2)


@dataclass(frozen=True)
class ArmijoConfig:
    """Backtracking line-search parameters."""

    initial_step: float = 1.0
    contraction: float = 0.5
    sufficient_decrease: float = 1e-4  # c1
    max_backtracks: int = 50

    def __post_init__(self):
        if not 0.0 < self.contraction < 1.0:
            raise ParameterError("contraction must lie in (0, 1)")
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ParameterError("sufficient_decrease must lie in (0, 1)")


@dataclass(frozen=True)
class CgMoConfig:
    """Solver settings; the objective-decrease threshold defaults to 1e-3."""

    epsilon: float = 1e-3
    max_iterations: int = 500
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ParameterError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")


@dataclass
class SolveTrace:
    """Per-iteration diagnostics of one conjugate-gradient solve."""

    objective_values: list[float] = field(default_factory=list)
    gradient_norms: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    termination_reason: str = "max_iterations"


def _armijo(
    x: FixedRankPoint,
    d: TangentVector,
    problem: LeastSquaresProblem,
    grad: TangentVector,
    cfg: CgMoConfig,
    initial_step: float | None,
    f_x: float | None,
) -> tuple[float, FixedRankPoint, float]:
    slope = inner(grad, d)
    if slope >= 0.0:
        raise ParameterError("search direction is not a descent direction")
    arm = cfg.armijo
    step = arm.initial_step if initial_step is None else initial_step
    if step <= 0.0:
        raise ParameterError("initial step must be positive")
    if f_x is None:
        f_x = problem.value(x.to_dense())
    for _ in range(arm.max_backtracks + 1):
        x_next = retract(x, d, step)
        f_next = problem.value(x_next.to_dense())
        if f_next <= f_x + arm.sufficient_decrease * step * slope:
            return step, x_next, f_next
        step *= arm.contraction
    raise StallError(
        f"no sufficient-decrease step within {arm.max_backtracks} backtracks"
    )


def armijo_step(
    x: FixedRankPoint,
    d: TangentVector,
    problem: LeastSquaresProblem,
    grad: TangentVector,
    cfg: CgMoConfig,
    initial_step: float | None = None,
) -> tuple[float, FixedRankPoint]:
    """Largest backtracked step satisfying the sufficient-decrease condition.

    Tries alpha = initial_step * contraction^i and accepts the first alpha
    with f(retract(x, d, alpha)) <= f(x) + c1 * alpha * <grad, d>.
    """
    step, x_next, _ = _armijo(x, d, problem, grad, cfg, initial_step, None)
    return step, x_next


def cg_mo_solve(
    problem: LeastSquaresProblem,
    x0: FixedRankPoint,
    cfg: CgMoConfig | None = None,
) -> tuple[FixedRankPoint, SolveTrace]:
    """Conjugate-gradient descent over the fixed-rank manifold.

    Iterates gradient projection, PR+ conjugate direction with vector
    transport (restarting on non-descent directions), Armijo step and
    retraction, until the per-iteration objective decrease drops to
    ``cfg.epsilon`` or the iteration cap is hit. The recorded objective
    trace is non-increasing.
    """
    cfg = cfg or CgMoConfig()
    if x0.shape != problem.unknown_shape:
        raise DimensionError(
            f"start point shape {x0.shape}, expected {problem.unknown_shape}"
        )
    x = x0
    x_dense = x.to_dense()
    trace = SolveTrace()
    trace.objective_values.append(problem.value(x_dense))
    prev_grad: TangentVector | None = None
    prev_grad_norm2 = 0.0
    prev_dir: TangentVector | None = None
    prev_step: float | None = None

    for _ in range(cfg.max_iterations):
        grad = riemannian_grad(x, problem.gradient(x_dense))
        grad_norm2 = inner(grad, grad)
        trace.gradient_norms.append(float(np.sqrt(grad_norm2)))
        if grad_norm2 == 0.0:  # exactly stationary
            trace.termination_reason = "threshold"
            break

        if prev_dir is None:
            direction = -grad
        else:
            beta = polak_ribiere_beta(grad, transport(x, prev_grad), prev_grad_norm2)
            direction = -grad + beta * transport(x, prev_dir)
            if inner(grad, direction) >= 0.0:
                direction = -grad  # restart on non-descent direction
        initial = 1.0 / np.sqrt(grad_norm2) if prev_step is None else 2.0 * prev_step

        try:
            step, x, f = _armijo(
                x, direction, problem, grad, cfg, initial, trace.objective_values[-1]
            )
        except StallError:
            trace.termination_reason = "degenerate"
            break
        x_dense = x.to_dense()
        trace.step_sizes.append(step)
        trace.objective_values.append(f)
        prev_grad, prev_grad_norm2, prev_dir, prev_step = grad, grad_norm2, direction, step

        if trace.objective_values[-2] - trace.objective_values[-1] <= cfg.epsilon:
            trace.termination_reason = "threshold"
            break

    return x, trace
