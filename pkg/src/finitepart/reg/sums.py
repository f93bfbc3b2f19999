"""Structured divergent sums: equispaced sampling sums and lattice point masses.

``euler_maclaurin_sequence`` is the Riemann-sum-like functional
``sum_{k<n} phi((k + beta) / n)``, whose growth is ``n * integral(phi)`` with
finite part ``(beta - 1/2) * (phi(1) - phi(0))``.  The lattice fixtures place
a weight at each integer node ``k`` with amplitude ``(n**(1/k) + 1)**(k*k)``,
producing a dense set of rational growth exponents whose coefficients are
binomials; they exercise extraction on crowded exponent sets.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from ..errors import InvalidExponent

__all__ = [
    "euler_maclaurin_sequence",
    "bernoulli_b1",
    "dirac_comb_sequence",
    "dirac_comb_expected_coefficient",
    "dirac_comb_key_set",
    "dirac_comb_expected_terms",
]


def euler_maclaurin_sequence(phi: Callable, beta: float, n: int) -> float:
    """The exact finite sum ``sum_{k=0}^{n-1} phi((k + beta) / n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    points = (np.arange(n) + beta) / n
    try:
        vals = np.asarray(phi(points), dtype=float)
        if vals.shape != points.shape:
            raise TypeError
    except Exception:
        vals = np.asarray([phi(float(x)) for x in points])
    return float(np.sum(vals))


def bernoulli_b1(beta: float) -> float:
    """First Bernoulli polynomial: ``beta - 1/2``."""
    return beta - 0.5


def dirac_comb_sequence(weights: Mapping[int, float], n: float) -> float:
    """``sum_k weights[k] * (n**(1/k) + 1)**(k*k)`` over the weighted nodes."""
    if n <= 0.0:
        raise ValueError("n must be positive")
    total = 0.0
    for k, w in weights.items():
        if int(k) != k or k < 1:
            raise InvalidExponent(f"node {k!r} must be a positive integer")
        total += w * (n ** (1.0 / k) + 1.0) ** (k * k)
    return total


def dirac_comb_expected_coefficient(j: int, k: int, q: int) -> int:
    """Binomial weight ``C(q**2 k**2, q j)`` of node ``q k`` at exponent ``j/k``.

    ``j/k`` must be in lowest terms; the binomial vanishes for the small-``q``
    nodes whose expansion does not reach that exponent.
    """
    if j < 1 or k < 1 or q < 1:
        raise InvalidExponent("need j, k, q >= 1")
    if math.gcd(j, k) != 1:
        raise InvalidExponent(f"{j}/{k} is not in lowest terms")
    return math.comb(q * q * k * k, q * j)


def dirac_comb_key_set(weights: Mapping[int, float]) -> set[Fraction]:
    """Reduced exponents ``j/k`` contributed by the weighted nodes."""
    keys: set[Fraction] = set()
    for k, w in weights.items():
        if w != 0.0:
            keys.update(Fraction(j, k) for j in range(1, k * k + 1))
    return keys


def dirac_comb_expected_terms(weights: Mapping[int, float]) -> dict[Fraction, float]:
    """Exact coefficient of every growth exponent, aggregated across nodes."""
    terms: dict[Fraction, float] = {}
    for alpha in sorted(dirac_comb_key_set(weights), reverse=True):
        jr, kr = alpha.numerator, alpha.denominator
        coeff = 0.0
        q = 1
        while q * kr <= max(weights):
            w = weights.get(q * kr, 0.0)
            if w != 0.0:
                coeff += w * dirac_comb_expected_coefficient(jr, kr, q)
            q += 1
        if coeff != 0.0:
            terms[alpha] = coeff
    return terms
