"""Block training protocol and observation stacking.

The reflecting surface holds one phase configuration per block while the
transmitter repeats an orthogonal pilot; despreading each block and
stacking the results yields two equivalent linear-regression forms of the
same data, one per unknown channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError
from .linalg import complex_gaussian, dft_matrix

__all__ = [
    "TrainingSetup",
    "ObservationStack",
    "make_training_setup",
    "simulate_block",
    "despread_and_strip",
    "stack_observations",
    "synthesize_observations",
]

MODES = ("model", "e2e")


@dataclass(frozen=True)
class TrainingSetup:
    """Training-phase constants: reflection patterns and pilot matrix.

    ``reflection_matrix`` is B x N_I with unit-modulus entries (row b is the
    phase configuration during block b); ``pilot_matrix`` is N_t x T with
    X @ X^H = T * I.
    """

    block_count: int  # B
    pilot_length: int  # T
    reflection_matrix: np.ndarray  # V, (B, N_I)
    pilot_matrix: np.ndarray  # X, (N_t, T)

    @property
    def num_elements(self) -> int:
        return self.reflection_matrix.shape[1]

    @property
    def num_tx(self) -> int:
        return self.pilot_matrix.shape[0]


@dataclass(frozen=True)
class ObservationStack:
    """Despread observations stacked in both regression orientations.

    ``y1`` stacks the B blocks vertically, shape (B*N_r, N_t); ``y2``
    stacks the transposed blocks, shape (B*N_t, N_r). Row-block b of y2 is
    the transpose of row-block b of y1.
    """

    y1: np.ndarray
    y2: np.ndarray
    setup: TrainingSetup | None = None
    noise_variance: float = field(default=float("nan"))

    @property
    def num_rx(self) -> int:
        return self.y2.shape[1]

    @property
    def num_tx(self) -> int:
        return self.y1.shape[1]


def make_training_setup(B: int, T: int, N_I: int, N_t: int) -> TrainingSetup:
    """Build the default DFT-based training constants.

    V is the first B rows of the N_I-point DFT matrix and X the first N_t
    rows of the T-point DFT matrix, so the pilots are orthogonal and all
    reflection coefficients have unit modulus.
    """
    if B < 1 or T < 1 or N_I < 1 or N_t < 1:
        raise ParameterError("B, T, N_I, N_t must be positive")
    if B > N_I:
        raise ParameterError(f"block count B={B} must not exceed N_I={N_I}")
    if T < N_t:
        raise ParameterError(f"pilot length T={T} must be at least N_t={N_t}")
    return TrainingSetup(
        block_count=B,
        pilot_length=T,
        reflection_matrix=dft_matrix(B, N_I),
        pilot_matrix=dft_matrix(N_t, T),
    )


def _composite(h_r: np.ndarray, h_p: np.ndarray, v_b: np.ndarray) -> np.ndarray:
    if h_r.shape[1] != v_b.size or h_p.shape[0] != v_b.size:
        raise DimensionError(
            f"reflection vector length {v_b.size} does not match channels "
            f"{h_r.shape} x {h_p.shape}"
        )
    return (h_r * v_b[None, :]) @ h_p  # H_r diag(v_b) H_p


def simulate_block(
    h_r: np.ndarray,
    h_p: np.ndarray,
    h_d: np.ndarray,
    v_b: np.ndarray,
    setup: TrainingSetup,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Raw pilot observation of one block: (H_r diag(v_b) H_p + H_d) X + Z."""
    composite = _composite(h_r, h_p, np.asarray(v_b).ravel())
    if h_d.shape != composite.shape:
        raise DimensionError(
            f"direct channel shape {h_d.shape} does not match {composite.shape}"
        )
    noise = complex_gaussian(composite.shape[0], setup.pilot_length, sigma2, rng)
    return (composite + h_d) @ setup.pilot_matrix + noise


def despread_and_strip(
    r_b: np.ndarray, setup: TrainingSetup, h_d: np.ndarray
) -> np.ndarray:
    """Correlate a block with the pilots and subtract the known direct term.

    Returns (1/T) R_b X^H - H_d, which equals the reflected composite plus
    noise of per-entry variance sigma2 / T.
    """
    if r_b.shape[1] != setup.pilot_length:
        raise DimensionError(
            f"block has {r_b.shape[1]} columns, expected T={setup.pilot_length}"
        )
    y = r_b @ setup.pilot_matrix.conj().T / setup.pilot_length
    if h_d.shape != y.shape:
        raise DimensionError(
            f"direct channel shape {h_d.shape} does not match {y.shape}"
        )
    return y - h_d


def stack_observations(
    blocks: list[np.ndarray],
    setup: TrainingSetup | None = None,
    noise_variance: float = float("nan"),
) -> ObservationStack:
    """Stack per-block observations into the two regression orientations.

    For any estimate pair the two residual objectives agree:
    ||y1 - kr(V, Hr) Hp||_F^2 == ||y2 - kr(V, Hp^T) Hr^T||_F^2.
    """
    if not blocks:
        raise DimensionError("need at least one block")
    shape = blocks[0].shape
    if any(b.shape != shape for b in blocks):
        raise DimensionError("all blocks must share the same shape")
    y1 = np.vstack(blocks)
    y2 = np.vstack([b.T for b in blocks])
    return ObservationStack(y1=y1, y2=y2, setup=setup, noise_variance=noise_variance)


def synthesize_observations(
    h_r: np.ndarray,
    h_p: np.ndarray,
    setup: TrainingSetup,
    sigma2: float,
    rng: np.random.Generator,
    mode: str = "model",
) -> ObservationStack:
    """Generate the stacked observations for a channel pair.

    ``model`` mode adds noise of variance ``sigma2`` directly at the
    despread-observation level; ``e2e`` mode simulates the raw pilot blocks
    and despreads them, leaving effective noise variance ``sigma2 / T``.
    """
    if mode == "end_to_end":
        mode = "e2e"
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    v = setup.reflection_matrix
    if h_r.shape[1] != v.shape[1] or h_p.shape[0] != v.shape[1]:
        raise DimensionError(
            f"channels {h_r.shape} x {h_p.shape} do not match N_I={v.shape[1]}"
        )
    blocks = []
    if mode == "model":
        for b in range(setup.block_count):
            noise = complex_gaussian(h_r.shape[0], h_p.shape[1], sigma2, rng)
            blocks.append(_composite(h_r, h_p, v[b]) + noise)
        effective_variance = sigma2
    else:
        h_d = np.zeros((h_r.shape[0], h_p.shape[1]), dtype=complex)
        for b in range(setup.block_count):
            r_b = simulate_block(h_r, h_p, h_d, v[b], setup, sigma2, rng)
            blocks.append(despread_and_strip(r_b, setup, h_d))
        effective_variance = sigma2 / setup.pilot_length
    return stack_observations(blocks, setup=setup, noise_variance=effective_variance)
