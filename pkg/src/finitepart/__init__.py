"""Finite-part limits of divergent quantities.

Decomposes sampled divergent data into a finite combination of basic infinite
scale functions (powers, power-log products, or general lexicographic factor
products) plus a convergent remainder, and exposes regularizers built on that
machinery for divergent integrals, Laurent poles, and structured sums.
"""

from .decomp import Decomposition, Diagnostics, Term, combine_linear, normalize, reconstruct
from .errors import (
    DomainError,
    ExpressionError,
    FinitePartError,
    InsufficientData,
    InvalidComparison,
    InvalidExponent,
    MaxTermsExceeded,
    Nonconvergent,
    NonPositiveLogLog,
    QuadratureFailure,
    StalledExtraction,
    SystemMismatch,
)
from .extract import (
    DEFAULT_CONFIG,
    ExtractConfig,
    SampledSequence,
    decompose,
    estimate_limit,
    estimate_log_order,
    estimate_order,
    extract_coefficient,
    geometric_grid,
    integer_geometric_grid,
    peel,
    sample_function,
    snap_exponent,
)
from .scales import (
    DominanceReport,
    ExponentKey,
    Ordering,
    ScaleSystem,
    compare,
    dominance_check,
    evaluate_scale,
    hadamard_key,
    hadamard_lex_system,
    hadamard_system,
    lex_key,
    lex_system,
    standard_key,
    standard_system,
    system_from_spec,
    system_spec,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Ordering",
    "ExponentKey",
    "ScaleSystem",
    "DominanceReport",
    "standard_key",
    "hadamard_key",
    "lex_key",
    "standard_system",
    "hadamard_system",
    "lex_system",
    "hadamard_lex_system",
    "compare",
    "evaluate_scale",
    "dominance_check",
    "system_spec",
    "system_from_spec",
    "Term",
    "Diagnostics",
    "Decomposition",
    "reconstruct",
    "combine_linear",
    "normalize",
    "SampledSequence",
    "ExtractConfig",
    "DEFAULT_CONFIG",
    "geometric_grid",
    "integer_geometric_grid",
    "sample_function",
    "estimate_order",
    "estimate_log_order",
    "snap_exponent",
    "extract_coefficient",
    "peel",
    "estimate_limit",
    "decompose",
    "FinitePartError",
    "InvalidComparison",
    "DomainError",
    "SystemMismatch",
    "InvalidExponent",
    "InsufficientData",
    "NonPositiveLogLog",
    "Nonconvergent",
    "StalledExtraction",
    "MaxTermsExceeded",
    "QuadratureFailure",
    "ExpressionError",
]
