"""Cramer-Rao type lower bounds and reference estimators for sparse Bayesian learning.

Subpackages:

* :mod:`crb_sbl.model` - hierarchical generative model and samplers;
* :mod:`crb_sbl.bounds` - closed-form information matrices and bounds;
* :mod:`crb_sbl.estimators` - EM, reweighted-l1 (ARD), and genie MMSE;
* :mod:`crb_sbl.oracle` - independent Monte-Carlo/quadrature verification;
* :mod:`crb_sbl.harness` - experiment grids, MSE aggregation, file outputs.
"""

from .model import (
    GcpPrior,
    IgDistribution,
    MeasurementEnsemble,
    NoiseModel,
    SblInstance,
    StudentTPrior,
    compressibility_profile,
    gcp_log_density,
    instance_from_json,
    instance_to_json,
    sample_compressible_vector,
    sample_gcp_vector,
    sample_hyperparameters,
    sample_measurement_matrix,
    snr_to_noise_variance,
    student_t_log_density,
    synthesize,
)
from .bounds import (
    BoundReport,
    MarginalCovariance,
    UnsupportedBoundError,
    bcrb_smv,
    bcrb_unknown_noise,
    gcp_fisher_term,
    hcrb_smv,
    hcrb_unknown_noise,
    marginal_covariance,
    materialize_kronecker,
    mcrb_gamma,
    mcrb_gamma_orthogonal_bound_diag,
    mcrb_gamma_xi,
    mcrb_x_gcp,
    mcrb_x_student_t,
    mmv_bounds,
)
from .estimators import (
    EstimateResult,
    PosteriorState,
    ard_sbl,
    compute_posterior,
    em_sbl,
    marginal_log_likelihood,
    mmse_oracle,
    weighted_l1_solve,
)
from .oracle import (
    OracleReport,
    fd_hessian_logprior,
    mc_fim,
    quad_expectation_ig,
    quad_gcp_fisher_term,
    regularity_check,
    score_gamma_xi,
)
from .harness import (
    ExperimentConfig,
    ResultTable,
    aggregate_mse,
    emit_outputs,
    run_experiment,
    verify_suite,
)
from ._linalg import NumericalFailure

__version__ = "0.1.0"
