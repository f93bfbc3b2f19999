"""Application regularizers built on the extraction engine."""

from .integrals import (
    KernelSpec,
    QuadratureConfig,
    TestFunction,
    finite_part_integral,
    truncated_integral,
)
from .laurent import contour_finite_part_oracle, laurent_finite_part, laurent_sequence
from .sums import (
    bernoulli_b1,
    dirac_comb_expected_coefficient,
    dirac_comb_expected_terms,
    dirac_comb_key_set,
    dirac_comb_sequence,
    euler_maclaurin_sequence,
)

__all__ = [
    "KernelSpec",
    "QuadratureConfig",
    "TestFunction",
    "truncated_integral",
    "finite_part_integral",
    "laurent_sequence",
    "laurent_finite_part",
    "contour_finite_part_oracle",
    "euler_maclaurin_sequence",
    "bernoulli_b1",
    "dirac_comb_sequence",
    "dirac_comb_expected_coefficient",
    "dirac_comb_expected_terms",
    "dirac_comb_key_set",
]
