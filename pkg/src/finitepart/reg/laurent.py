"""Finite parts at a pole: evaluate along ``z = 1/n`` and peel the principal part.

For ``f(z) = sum_j a_j z**-j + g(z)`` with ``g`` analytic at 0, the samples
``f(1/n)`` grow like ``sum_j a_j n**j``; integer-snapped extraction recovers
the pole order, every principal-part coefficient, and the finite part
``g(0)``.  The mean of ``f`` over a centred circle is an independent oracle
for ``g(0)`` (the trapezoid rule is spectrally accurate on analytic data).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import replace
from typing import Callable

import numpy as np

from ..decomp import Decomposition
from ..errors import InsufficientData
from ..extract import (
    DEFAULT_CONFIG,
    ExtractConfig,
    SampledSequence,
    decompose,
    integer_geometric_grid,
)
from ..scales import standard_system

__all__ = ["laurent_sequence", "laurent_finite_part", "contour_finite_part_oracle"]


def laurent_sequence(f: Callable, n: int):
    """The sample ``f(1/n)``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return f(1.0 / n)


def contour_finite_part_oracle(f: Callable, r: float = 0.5, m: int = 256):
    """Mean of ``f`` over the circle of radius ``r``: the finite part at the pole.

    Exact for principal parts of order below ``m``; for the analytic part the
    error decays geometrically in ``m``.
    """
    if not 0.0 < r <= 1.0:
        raise ValueError("need 0 < r <= 1")
    if m < 16:
        raise ValueError("need at least 16 nodes")
    nodes = r * np.exp(2j * math.pi * np.arange(m) / m)
    total = sum(complex(f(z)) for z in nodes) / m
    return total.real if total.imag == 0.0 else total


def laurent_finite_part(
    f: Callable,
    config: ExtractConfig = DEFAULT_CONFIG,
    n_min: int = 2,
    n_max: int = 512,
) -> tuple[int, Decomposition]:
    """Pole order and decomposition of ``f(1/n)`` with integer exponents.

    Essential singularities make the growth outrun every power; the peel loop
    then exhausts its term budget and raises ``MaxTermsExceeded``.
    """
    grid = integer_geometric_grid(n_min, n_max, ratio=2.0 ** 0.25)
    values = []
    lams = []
    for n in grid:
        v = complex(laurent_sequence(f, int(n)))
        if cmath.isfinite(v):
            lams.append(float(n))
            values.append(v)
    if len(lams) < 8:
        raise InsufficientData("too few finite samples of f(1/n)")
    vals = np.asarray(values)
    if np.all(vals.imag == 0.0):
        vals = vals.real
    seq = SampledSequence(np.asarray(lams), vals)
    dec = decompose(seq, standard_system(), replace(config, snap_denominator=1))
    order = int(round(dec.terms[0].key.exponents[0])) if dec.terms else 0
    return order, dec
