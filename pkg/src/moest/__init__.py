"""Estimation of the two reflected channels in a surface-assisted MIMO link.

The estimator alternates Riemannian conjugate-gradient solves of two
fixed-rank least-squares subproblems; an unconstrained alternating
least-squares baseline and a Monte Carlo harness reproduce the NMSE
trends that motivate the rank constraints.
"""

from .channel import (
    ArrayGeometry,
    PathSet,
    numerical_rank,
    sample_paths,
    synthesize_channel,
    upa_response,
)
from .errors import (
    DegenerateRankError,
    DimensionError,
    MoestError,
    ParameterError,
    StallError,
    UndefinedMetricError,
)
from .estimators import EstimationReport, alt_ls, mo_est, nmse_cascaded
from .experiments import (
    ExperimentConfig,
    ResultRow,
    load_config,
    read_csv,
    run_mismatch_sweep,
    run_path_sweep,
    run_snr_sweep,
    summarize,
    write_csv,
)
from .linalg import (
    SvdFactors,
    complex_gaussian,
    dft_matrix,
    khatri_rao,
    pseudo_inverse,
    truncated_svd,
)
from .manifold import (
    FixedRankPoint,
    TangentVector,
    from_dense,
    inner,
    project,
    random_point,
    retract,
    transport,
)
from .protocol import (
    ObservationStack,
    TrainingSetup,
    despread_and_strip,
    make_training_setup,
    simulate_block,
    stack_observations,
    synthesize_observations,
)
from .solver import (
    ArmijoConfig,
    CgMoConfig,
    LeastSquaresProblem,
    SolveTrace,
    armijo_step,
    cg_mo_solve,
    euclidean_grad_hp,
    euclidean_grad_hr,
    objective,
    polak_ribiere_beta,
    riemannian_grad,
)

__version__ = "0.1.0"
