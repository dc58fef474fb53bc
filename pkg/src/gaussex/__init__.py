"""Extreme-value numerics for Gaussian random fields."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, GaussexError, ModelError, NotPositiveDefinite, UsageError
from .core import (
    CovarianceKernel,
    SampleBatch,
    build_covariance_matrix,
    cholesky_factor,
    fbm_covariance,
    fbm_kernel,
    sample_paths,
    subfbm_covariance,
    subfbm_kernel,
)
from .grids import GridSpec, interval_grid, refined_interval_grid, refined_simplex_grid, simplex_grid
from .models import ChiSpec, OptimizerReport, PerfTableSpec, check_expansions, perf_cov, perf_optimizer
from .constants import (
    ConstantEstimate,
    generalized_piterbarg_estimate,
    hw_estimate,
    known_constants,
    lambda_extrapolate,
    pickands_estimate,
    piterbarg_estimate,
)
from .asymptotics import AsymptoticFormula, LambdaPartition, chi_formula, gamma_fn, perf_table_formula, prop1_formula, psi
from .harness import FieldModel, ResultRecord, TailEstimate, estimate_tail, ratio_table
