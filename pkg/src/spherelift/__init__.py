"""Large-n limit of the spherical n-vector model via a log-det regularized SDP."""

from .errors import (
    AsymmetryTooLarge,
    CostGuard,
    DegenerateInterval,
    DimensionMismatch,
    DomainError,
    LineSearchStalled,
    MaxIterExceeded,
    MonotonicityViolation,
    NonFinite,
    NonSquare,
    NotOverparameterized,
    NotPositiveDefinite,
    OutOfSupport,
    RankDeficient,
    SolverError,
    SphereliftError,
    ValidationError,
)
from .model import (
    CholeskyFactor,
    ElliptopeMatrix,
    InteractionMatrix,
    LowerCorrelations,
    ModelParams,
    SpinSample,
    UpperREntries,
    assemble_R,
    assemble_S,
    energy,
    log_density_L,
    log_density_U,
    log_norm_const,
    validate_params,
)
from .oracle import (
    QuadratureSpec,
    grothendieck_prob,
    k2_cdf,
    k2_log_partition_ratio,
    k2_moment,
    k2_stationary,
    k3_grid_moments,
)
from .sampler import (
    ChainOptions,
    GibbsState,
    RngStream,
    approx_sample,
    exact_sample,
    exact_samples,
    gibbs_sweep,
    haar_stiefel,
    hyperplane_round,
)
from .solver import (
    DualVector,
    SolveReport,
    cholesky_upper,
    dual_to_primal,
    kkt_residual,
    objective,
    solve_maxcut_limit,
    solve_regularized,
)

__version__ = "0.1.0"
