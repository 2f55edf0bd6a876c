"""Multi-agent gradient-tracking optimization simulator.

Builds synthetic communication graphs and doubly stochastic consensus
weights, runs gradient tracking against DGD and centralized descent on
benchmark objective suites, and evaluates the matching convergence-rate
matrices, step-size rules, and error bounds against live trajectories.
"""

from .algorithms import (
    ALGORITHMS,
    DivergenceError,
    StepSchedule,
    TrackingState,
    TrajectoryRecord,
    cgd_step,
    dgd_step,
    gt_init,
    gt_step,
    run,
)
from .bounds import (
    EnvelopeConstants,
    InitialNorms,
    RateMatrix,
    build_rate_matrix,
    check_error_recursion,
    consensus_error_envelope,
    consensus_min_bound,
    error_vector,
    objective_avg_bound,
    power_iteration_radius,
    recommend_eta,
    spectral_radius,
    spectral_radius_bound,
)
from .config import AlgorithmSpec, ConfigError, ExperimentConfig, load_config
from .objectives import (
    DegenerateDataError,
    LogisticLossSuite,
    ObjectiveSuite,
    OracleFailureError,
    QuarticTailSuite,
    SquareLossSuite,
    finite_diff_check,
    gen_linear_regression,
    gen_logistic_regression,
    gen_quartic_tail,
    suite_from_json,
)
from .topology import (
    Graph,
    GraphGenerationError,
    gen_complete,
    gen_erdos_renyi,
    gen_path,
    gen_random_regular,
    is_connected,
    read_edge_list,
    write_edge_list,
)
from .weights import (
    build_laplacian_weights,
    build_lazy_metropolis,
    lazy_metropolis_sigma_bound,
    sigma,
    validate_weights,
    write_matrix_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
