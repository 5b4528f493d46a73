"""Mini-max linear regression over data blocks with distribution-uncertain errors."""

from .core import (
    BlockPartition,
    Dataset,
    DistributionFamily,
    FamilyMember,
    FitResult,
    SublinearMoments,
    population_beta_mean_certain,
    population_beta_mean_uncertain,
    sublinear_expectation,
    sublinear_moments,
)
from .estimators import (
    SolverConfig,
    block_mse,
    minimax_fit,
    mu_upper_hat,
    ols_fit,
    predict,
    profile_minimax_fit,
)
from .metrics import (
    BenchmarkReport,
    ape,
    coefficient_mse,
    mpe,
    normality_check,
    run_benchmark,
)
from .partition import (
    PartitionConfig,
    identify_max_variance_blocks,
    response_descending_partition,
    time_order_partition,
)
from .preprocess import center_columns, logit_transform, rebalance_blocks
from .simgen import (
    ExperimentConfig,
    IIDNormal,
    MultivariateNormal,
    equicorrelation,
    experiment_config,
    generate,
    make_experiment,
    sample_block_errors,
)
from .sparse import (
    LassoConfig,
    cv_select_lambda,
    default_lambda_grid,
    glasso_fit,
    glasso_mean_uncertain_fit,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "BlockPartition",
    "Dataset",
    "DistributionFamily",
    "ExperimentConfig",
    "FamilyMember",
    "FitResult",
    "IIDNormal",
    "LassoConfig",
    "MultivariateNormal",
    "PartitionConfig",
    "SolverConfig",
    "SublinearMoments",
    "ape",
    "block_mse",
    "center_columns",
    "coefficient_mse",
    "cv_select_lambda",
    "default_lambda_grid",
    "equicorrelation",
    "experiment_config",
    "generate",
    "glasso_fit",
    "glasso_mean_uncertain_fit",
    "identify_max_variance_blocks",
    "logit_transform",
    "make_experiment",
    "minimax_fit",
    "mpe",
    "mu_upper_hat",
    "normality_check",
    "ols_fit",
    "population_beta_mean_certain",
    "population_beta_mean_uncertain",
    "predict",
    "profile_minimax_fit",
    "rebalance_blocks",
    "response_descending_partition",
    "run_benchmark",
    "sample_block_errors",
    "sublinear_expectation",
    "sublinear_moments",
    "time_order_partition",
]
