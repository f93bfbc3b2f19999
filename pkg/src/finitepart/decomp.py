"""Canonical decomposition of a divergent quantity: scale terms + finite part.

A :class:`Decomposition` stores the finitely many scale terms with nonzero
coefficients, strictly decreasing in the family order, together with the
finite-part value and fit diagnostics.  Splitting a quantity this way is
unique, which is what makes round-trip testing meaningful.
"""

from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import SystemMismatch
from .scales import ExponentKey, Ordering, ScaleSystem, compare, evaluate_scale

__all__ = ["Term", "Diagnostics", "Decomposition", "reconstruct", "combine_linear", "normalize"]

Scalar = complex | float


def _as_scalar(value) -> Scalar:
    """Collapse numpy scalars to plain float/complex; reject non-finite values."""
    if isinstance(value, (np.complexfloating, complex)):
        c = complex(value)
        if not cmath.isfinite(c):
            raise ValueError(f"non-finite scalar {value!r}")
        return c if c.imag != 0.0 else c.real
    f = float(value)
    if not math.isfinite(f):
        raise ValueError(f"non-finite scalar {value!r}")
    return f


@dataclass(frozen=True)
class Term:
    key: ExponentKey
    coefficient: Scalar
    stderr: float = 0.0
    snapped: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficient", _as_scalar(self.coefficient))
        object.__setattr__(self, "stderr", float(self.stderr))
        if self.stderr < 0.0:
            raise ValueError("stderr must be >= 0")


@dataclass(frozen=True)
class Diagnostics:
    residual_norm: float = 0.0
    iterations: int = 0
    grid_span: tuple[float, float, int] | None = None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class Decomposition:
    """Ordered scale terms plus the finite part of the limit.

    Invariants: term keys strictly decrease in the family order, every
    coefficient is nonzero and finite, and an empty term list means the
    underlying quantity simply converges to ``finite_part``.
    """

    system: ScaleSystem
    terms: tuple[Term, ...]
    finite_part: Scalar
    finite_part_stderr: float = 0.0
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "finite_part", _as_scalar(self.finite_part))
        for t in self.terms:
            if t.coefficient == 0:
                raise ValueError("zero-coefficient terms must be dropped")
        for a, b in zip(self.terms, self.terms[1:]):
            if compare(a.key, b.key) != Ordering.GREATER:
                raise ValueError("term keys must strictly decrease")

    @property
    def keys(self) -> tuple[ExponentKey, ...]:
        return tuple(t.key for t in self.terms)

    def coefficient_of(self, key: ExponentKey) -> Scalar:
        for t in self.terms:
            if t.key == key:
                return t.coefficient
        return 0.0


def reconstruct(d: Decomposition, lam):
    """Evaluate the model sum(coeff * rho_key(lam)) + finite_part at ``lam``."""
    total = d.finite_part * np.ones_like(np.asarray(lam, dtype=float))
    for t in d.terms:
        total = total + t.coefficient * evaluate_scale(d.system, t.key, lam)
    if np.ndim(lam) == 0:
        return _as_scalar(total)
    return total


def normalize(
    system: ScaleSystem,
    terms: Iterable[Term | Sequence],
    finite_part: Scalar,
    zero_tol: float = 1e-12,
    finite_part_stderr: float = 0.0,
    diagnostics: Diagnostics | None = None,
) -> Decomposition:
    """Merge duplicate keys, drop negligible coefficients, sort descending.

    A coefficient is negligible when its magnitude is at most ``zero_tol``
    times the largest coefficient magnitude (or times 1 if nothing is left).
    """
    merged: dict[ExponentKey, Term] = {}
    for item in terms:
        t = item if isinstance(item, Term) else Term(*item)
        prev = merged.get(t.key)
        if prev is None:
            merged[t.key] = t
        else:
            merged[t.key] = Term(
                t.key,
                prev.coefficient + t.coefficient,
                math.hypot(prev.stderr, t.stderr),
                prev.snapped or t.snapped,
            )
    kept = [t for t in merged.values() if t.coefficient != 0]
    scale = max((abs(t.coefficient) for t in kept), default=1.0)
    kept = [t for t in kept if abs(t.coefficient) > zero_tol * scale]
    kept.sort(key=functools.cmp_to_key(lambda u, v: compare(u.key, v.key)), reverse=True)
    return Decomposition(
        system,
        tuple(kept),
        finite_part,
        finite_part_stderr,
        diagnostics if diagnostics is not None else Diagnostics(),
    )


def combine_linear(d1: Decomposition, d2: Decomposition, c: Scalar) -> Decomposition:
    """The decomposition of ``x1 + c * x2``: term-wise merge, finite parts added."""
    if d1.system != d2.system:
        raise SystemMismatch("decompositions built over different scale systems")
    c = _as_scalar(c)
    shifted = [replace(t, coefficient=c * t.coefficient, stderr=abs(c) * t.stderr) for t in d2.terms]
    return normalize(
        d1.system,
        list(d1.terms) + shifted,
        d1.finite_part + c * d2.finite_part,
        finite_part_stderr=math.hypot(d1.finite_part_stderr, abs(c) * d2.finite_part_stderr),
    )
