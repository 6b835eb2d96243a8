"""High-dimensional Bayesian optimization in a learned subspace.

Sliced inverse regression (and a kernelized-input variant) estimates a
low-dimensional subspace online from the evaluations themselves; GP-UCB
with a CMA-ES maximizer proposes queries through that subspace, so the
model never works in the ambient dimension.
"""

from .acquisition import (
    CmaesConfig,
    UcbConfig,
    beta_at,
    default_cmaes_config,
    maximize_acquisition,
    ucb,
    ucb_values,
)
from .bench import (
    BenchmarkReport,
    Problem,
    SuiteCell,
    branin,
    branin_problem,
    embed,
    export_csv,
    make_problem,
    parse_suite_file,
    run_suite,
    trimodal,
    trimodal_problem,
)
from .driver import (
    RegretTrace,
    RunConfig,
    run,
    run_baseline,
    run_kisir_bo,
    run_sir_bo,
)
from .gp import (
    GpModel,
    HyperSearchSpace,
    KernelConfig,
    PosteriorPrediction,
    default_search_space,
    fit_hyperparameters,
    gp_fit,
    gp_predict,
    gp_predict_batch,
    kernel_eval,
    kernel_matrix,
    kernel_vector,
    log_marginal_likelihood,
)
from .kisir import (
    GramState,
    KisirDecomposition,
    centered_cross_gram,
    gram_append,
    gram_build,
    kisir_directions,
    kisir_project,
)
from .sdr import (
    SirDecomposition,
    SliceAssignment,
    dense_generalized_eig,
    partition_slices,
    project,
    regularized_covariance,
    sir_directions,
    slice_factor,
)

__all__ = [
    "BenchmarkReport",
    "CmaesConfig",
    "GpModel",
    "GramState",
    "HyperSearchSpace",
    "KernelConfig",
    "KisirDecomposition",
    "PosteriorPrediction",
    "Problem",
    "RegretTrace",
    "RunConfig",
    "SirDecomposition",
    "SliceAssignment",
    "SuiteCell",
    "UcbConfig",
    "beta_at",
    "branin",
    "branin_problem",
    "centered_cross_gram",
    "default_cmaes_config",
    "default_search_space",
    "dense_generalized_eig",
    "embed",
    "export_csv",
    "fit_hyperparameters",
    "gp_fit",
    "gp_predict",
    "gp_predict_batch",
    "gram_append",
    "gram_build",
    "kernel_eval",
    "kernel_matrix",
    "kernel_vector",
    "kisir_directions",
    "kisir_project",
    "log_marginal_likelihood",
    "make_problem",
    "maximize_acquisition",
    "parse_suite_file",
    "partition_slices",
    "project",
    "regularized_covariance",
    "run",
    "run_baseline",
    "run_kisir_bo",
    "run_sir_bo",
    "run_suite",
    "sir_directions",
    "slice_factor",
    "trimodal",
    "trimodal_problem",
    "ucb",
    "ucb_values",
]
