"""Truncated-Z inference for lasso-selected regression coefficients.

Fit a lasso, then compute exact truncated-Gaussian p-values, confidence
intervals, and MLE point estimates for the selected variables under a range
of conditioning strategies, from minimal (variable inclusion) to maximal
(active set and signs), including stabilized target formation.
"""

from .estimator import LassoInference
from .geometry import (
    LineDecomposition,
    LinePartition,
    Polyhedron,
    default_z_range,
    full_target_truncation,
    grid_truncation,
    line_partition,
    model_sign_truncation,
    model_truncation,
    polyhedron_for_model_signs,
    stable_l1_truncation,
    stable_t_truncation,
    truncation_interval,
    variable_truncation,
)
from .inference import (
    METHODS,
    AnalyzeOptions,
    InferenceResult,
    SigmaSpec,
    TargetSpec,
    analyze,
    bonferroni_interval,
    build_target,
    default_cutoff,
    default_lambda_high,
    estimate_sigma_reid,
    naive_interval,
    select_high_value_t,
    universal_lambda,
)
from .intervals import EmptyTruncationError, TruncationSet
from .lasso import (
    ConvergenceError,
    KKTReport,
    LassoFit,
    LassoOptions,
    fit_lasso,
    fit_lasso_warm,
    kkt_report,
    null_penalty,
)
from .simulation import (
    DesignScheme,
    NoiseScheme,
    StudyConfig,
    StudyReport,
    calibrate_delta,
    calibrate_lambda_cv,
    gen_design,
    gen_response,
    run_study,
)
from .truncgauss import (
    IntervalEstimate,
    TruncatedGaussian,
    tg_cdf,
    tg_interval,
    tg_mle,
    tg_pivot,
    tg_pvalue,
)
from .validation import ValidationError

__version__ = "0.1.0"

__all__ = [
    "AnalyzeOptions",
    "ConvergenceError",
    "DesignScheme",
    "EmptyTruncationError",
    "IntervalEstimate",
    "InferenceResult",
    "KKTReport",
    "LassoFit",
    "LassoInference",
    "LassoOptions",
    "LineDecomposition",
    "LinePartition",
    "METHODS",
    "NoiseScheme",
    "Polyhedron",
    "SigmaSpec",
    "StudyConfig",
    "StudyReport",
    "TargetSpec",
    "TruncatedGaussian",
    "TruncationSet",
    "ValidationError",
    "analyze",
    "bonferroni_interval",
    "build_target",
    "calibrate_delta",
    "calibrate_lambda_cv",
    "default_cutoff",
    "default_lambda_high",
    "default_z_range",
    "estimate_sigma_reid",
    "fit_lasso",
    "fit_lasso_warm",
    "full_target_truncation",
    "gen_design",
    "gen_response",
    "grid_truncation",
    "kkt_report",
    "line_partition",
    "model_sign_truncation",
    "model_truncation",
    "naive_interval",
    "null_penalty",
    "polyhedron_for_model_signs",
    "run_study",
    "select_high_value_t",
    "stable_l1_truncation",
    "stable_t_truncation",
    "tg_cdf",
    "tg_interval",
    "tg_mle",
    "tg_pivot",
    "tg_pvalue",
    "truncation_interval",
    "universal_lambda",
    "variable_truncation",
]
