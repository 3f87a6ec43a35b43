"""Cascaded-channel estimators: rank-constrained alternation and the
unconstrained least-squares baseline, plus the scale-invariant NMSE metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, UndefinedMetricError
from .linalg import khatri_rao, pseudo_inverse
from .manifold import random_point
from .protocol import ObservationStack
from .solver import CgMoConfig, LeastSquaresProblem, SolveTrace, cg_mo_solve

__all__ = ["EstimationReport", "mo_est", "alt_ls", "nmse_cascaded"]

DEFAULT_OUTER_EPSILON = 1e-3
DEFAULT_OUTER_ITERATIONS = 50


@dataclass
class EstimationReport:
    """Estimates plus convergence diagnostics of one estimator run."""

    hr_hat: np.ndarray  # (N_r, N_I)
    hp_hat: np.ndarray  # (N_I, N_t)
    outer_objectives: list[float] = field(default_factory=list)
    inner_traces: list[SolveTrace] = field(default_factory=list)
    termination_reason: str = "max_iterations"
    outer_iterations: int = 0


def _require_setup(obs: ObservationStack) -> np.ndarray:
    if obs.setup is None:
        raise ParameterError("observation stack carries no training setup")
    return obs.setup.reflection_matrix


def _hp_problem(v: np.ndarray, hr: np.ndarray, y1: np.ndarray) -> LeastSquaresProblem:
    return LeastSquaresProblem(khatri_rao(v, hr), y1, transposed_unknown=False)


def _hr_problem(v: np.ndarray, hp: np.ndarray, y2: np.ndarray) -> LeastSquaresProblem:
    return LeastSquaresProblem(khatri_rao(v, hp.T), y2, transposed_unknown=True)


def mo_est(
    obs: ObservationStack,
    P: int,
    Q: int,
    cfg: CgMoConfig | None = None,
    outer_epsilon: float = DEFAULT_OUTER_EPSILON,
    rng: np.random.Generator | None = None,
    restarts: int = 1,
    max_outer_iterations: int = DEFAULT_OUTER_ITERATIONS,
) -> EstimationReport:
    """Alternating fixed-rank estimation of the two reflected channels.

    From random rank-P / rank-Q starts, alternately solves the two
    conjugate-gradient subproblems (each warm-started at the previous
    estimate) until the joint objective decrease drops to
    ``outer_epsilon``. With ``restarts`` > 1 the whole alternation is
    repeated from fresh random starts and the lowest-objective report wins.
    """
    v = _require_setup(obs)
    n_r, n_t, n_i = obs.num_rx, obs.num_tx, v.shape[1]
    if not 1 <= P <= min(n_r, n_i):
        raise ParameterError(f"rank P={P} out of range for an {n_r}x{n_i} channel")
    if not 1 <= Q <= min(n_i, n_t):
        raise ParameterError(f"rank Q={Q} out of range for an {n_i}x{n_t} channel")
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    cfg = cfg or CgMoConfig()
    rng = rng or np.random.default_rng()

    best: EstimationReport | None = None
    for _ in range(restarts):
        hr_point = random_point(n_r, n_i, P, rng)
        hp_point = random_point(n_i, n_t, Q, rng)
        report = EstimationReport(
            hr_hat=hr_point.to_dense(), hp_hat=hp_point.to_dense()
        )

        for k in range(max_outer_iterations):
            problem_p = _hp_problem(v, report.hr_hat, obs.y1)
            if k == 0:
                report.outer_objectives.append(problem_p.value(report.hp_hat))
            prev = (hr_point, hp_point, report.hr_hat, report.hp_hat)
            hp_point, trace_p = cg_mo_solve(problem_p, hp_point, cfg)
            report.hp_hat = hp_point.to_dense()
            hr_point, trace_r = cg_mo_solve(
                _hr_problem(v, report.hp_hat, obs.y2), hr_point, cfg
            )
            report.hr_hat = hr_point.to_dense()
            report.inner_traces += [trace_p, trace_r]
            f = trace_r.objective_values[-1]

            if f > report.outer_objectives[-1]:
                # No real progress: the two residual orientations agree only
                # to roundoff, so keep the previous (not worse) iterate.
                hr_point, hp_point, report.hr_hat, report.hp_hat = prev
                report.termination_reason = "threshold"
                break
            report.outer_objectives.append(f)
            report.outer_iterations = k + 1
            if "degenerate" in (trace_p.termination_reason, trace_r.termination_reason):
                report.termination_reason = "degenerate"
                break
            if report.outer_objectives[-2] - f <= outer_epsilon:
                report.termination_reason = "threshold"
                break

        if best is None or report.outer_objectives[-1] < best.outer_objectives[-1]:
            best = report
    return best


def alt_ls(
    obs: ObservationStack,
    iterations: int = DEFAULT_OUTER_ITERATIONS,
    rng: np.random.Generator | None = None,
    epsilon: float = DEFAULT_OUTER_EPSILON,
) -> EstimationReport:
    """Unconstrained alternating least squares baseline.

    Alternates the two closed-form solves hp = pinv(kr(V, hr)) y1 and
    hr^T = pinv(kr(V, hp^T)) y2 from a random start; the objective after
    every half-step is recorded and non-increasing.
    """
    v = _require_setup(obs)
    n_r, n_t, n_i = obs.num_rx, obs.num_tx, v.shape[1]
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    rng = rng or np.random.default_rng()

    hr = (rng.standard_normal((n_r, n_i)) + 1j * rng.standard_normal((n_r, n_i)))
    hr /= np.linalg.norm(hr)
    hp = np.zeros((n_i, n_t), dtype=complex)
    report = EstimationReport(hr_hat=hr, hp_hat=hp)

    def half_step(problem: LeastSquaresProblem, target: np.ndarray) -> bool:
        """Apply one closed-form solve; False when roundoff stops progress."""
        solution = pseudo_inverse(problem.design) @ target
        f = problem.value(solution.T if problem.transposed_unknown else solution)
        if report.outer_objectives and f > report.outer_objectives[-1]:
            return False
        if problem.transposed_unknown:
            report.hr_hat = solution.T
        else:
            report.hp_hat = solution
        report.outer_objectives.append(f)
        return True

    for k in range(iterations):
        if not half_step(_hp_problem(v, report.hr_hat, obs.y1), obs.y1):
            report.termination_reason = "threshold"
            break
        if not half_step(_hr_problem(v, report.hp_hat, obs.y2), obs.y2):
            report.termination_reason = "threshold"
            break
        report.outer_iterations = k + 1

        if (
            len(report.outer_objectives) >= 4
            and report.outer_objectives[-3] - report.outer_objectives[-1] <= epsilon
        ):
            report.termination_reason = "threshold"
            break
    return report


def nmse_cascaded(
    true_hr: np.ndarray,
    true_hp: np.ndarray,
    hr_hat: np.ndarray,
    hp_hat: np.ndarray,
) -> float:
    """Normalized squared error of the cascaded channel product.

    Invariant under the inherent per-estimate scaling ambiguity
    (a*hr_hat, hp_hat/a).
    """
    cascade = true_hr @ true_hp
    denom = float(np.linalg.norm(cascade) ** 2)
    if denom == 0.0:
        raise UndefinedMetricError("true cascaded channel is zero")
    return float(np.linalg.norm(cascade - hr_hat @ hp_hat) ** 2) / denom
