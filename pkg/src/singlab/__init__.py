"""singlab: singularity structure of biased discrete random matrices.

Entry laws are standardized as eta = delta * xi + b around their mode;
the library samples integer-exact matrices, runs screened/exact
singularity censuses, decomposes the sphere into structured classes and
the gradual remainder, and estimates the randomized degree functional
that controls unstructured anti-concentration.
"""

from .laws import (
    AmbiguousMode,
    DegenerateLaw,
    DiscreteLaw,
    LawFormatError,
    RawPmf,
    SupportConstants,
    characteristic_function,
    cf_grid,
    collision_probability,
    load_law,
    parse_law,
    standardize,
    support_constants,
    zero_mass,
)
from .sampling import (
    MatrixSample,
    RngStream,
    read_matrix,
    sample_matrix,
    substream,
    to_float,
    write_matrix,
)
from .linalg import (
    NonFinite,
    RankResult,
    SvEstimate,
    column_distance,
    det_screen,
    e_norm,
    exact_rank,
    smallest_singular_value,
    spectral_norm_deviation,
)
from .vectors import (
    DecompositionParams,
    EmptyLambda,
    LambdaSpec,
    OutOfRegime,
    Rearrangement,
    VectorLabel,
    ZeroScaleEntry,
    classify,
    coverage_check,
    derive_params,
    gradual_nonconstant,
    growth_g,
    lambda_member,
    rearrange,
    sample_lambda,
    steep_norm_ratio_check,
)
from .rud import (
    CutoffFn,
    RudEstimate,
    SandwichViolation,
    TooLarge,
    all_sequences,
    distance_kernel_check,
    levy_estimate,
    make_cutoff,
    rud_estimate,
    rud_exact,
    sequence_count,
    small_ball_check,
)
from .events import (
    LevelSetPair,
    StructuredFindings,
    attribute_cause,
    binomial_bounds,
    detect_level_set_pairs,
    detect_zero_lines,
    e_col_holds,
    e_sum_holds,
    in_lemma_regime,
    incidence_set,
    support_counts,
    theory_leading_order,
)
from .harness import (
    AuditFailure,
    ConfigError,
    DegenerateKernel,
    ExperimentConfig,
    kernel_vector,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousMode",
    "AuditFailure",
    "ConfigError",
    "CutoffFn",
    "DecompositionParams",
    "DegenerateKernel",
    "DegenerateLaw",
    "DiscreteLaw",
    "EmptyLambda",
    "ExperimentConfig",
    "LambdaSpec",
    "LawFormatError",
    "LevelSetPair",
    "MatrixSample",
    "NonFinite",
    "OutOfRegime",
    "RankResult",
    "RawPmf",
    "Rearrangement",
    "RngStream",
    "RudEstimate",
    "SandwichViolation",
    "StructuredFindings",
    "SupportConstants",
    "SvEstimate",
    "TooLarge",
    "VectorLabel",
    "ZeroScaleEntry",
    "all_sequences",
    "attribute_cause",
    "binomial_bounds",
    "cf_grid",
    "characteristic_function",
    "classify",
    "collision_probability",
    "column_distance",
    "coverage_check",
    "derive_params",
    "det_screen",
    "detect_level_set_pairs",
    "detect_zero_lines",
    "distance_kernel_check",
    "e_col_holds",
    "e_norm",
    "e_sum_holds",
    "exact_rank",
    "gradual_nonconstant",
    "growth_g",
    "in_lemma_regime",
    "incidence_set",
    "kernel_vector",
    "lambda_member",
    "levy_estimate",
    "load_config",
    "load_law",
    "make_cutoff",
    "parse_law",
    "read_matrix",
    "rearrange",
    "rud_estimate",
    "rud_exact",
    "run_experiment",
    "sample_lambda",
    "sample_matrix",
    "sequence_count",
    "small_ball_check",
    "smallest_singular_value",
    "spectral_norm_deviation",
    "standardize",
    "steep_norm_ratio_check",
    "substream",
    "support_constants",
    "support_counts",
    "theory_leading_order",
    "to_float",
    "write_matrix",
]
