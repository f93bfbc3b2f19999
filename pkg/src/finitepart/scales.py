"""Exponent keys and the evaluatable families of basic infinite functions.

Three families are supported:

* ``standard``  -- powers ``lam**alpha`` with ``alpha > 0``,
* ``hadamard``  -- power-log products ``lam**alpha * log(lam)**beta`` ordered
  lexicographically on ``(alpha, beta)``,
* ``lex``       -- products ``F1**a1 * ... * Fm**am`` of user-supplied factors,
  each factor growing slower than any positive power of its predecessor,
  ordered lexicographically on the exponent vector.

Keys are immutable values, totally ordered within a family; comparing keys
from different families is an error, never a silent coercion.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidComparison, SystemMismatch

__all__ = [
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
]

STANDARD = "standard"
HADAMARD = "hadamard"
LEX = "lex"


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True)
class ExponentKey:
    """One element of the ordered exponent set of a scale family.

    ``exponents`` holds ``(alpha,)`` for standard keys, ``(alpha, beta)`` for
    Hadamard keys and the full vector for lex keys.  ``exact`` optionally
    annotates snapped coordinates with the rational they were snapped to; it
    never participates in equality or ordering.
    """

    kind: str
    exponents: tuple[float, ...]
    exact: tuple[Fraction | None, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        exps = tuple(float(e) for e in self.exponents)
        object.__setattr__(self, "exponents", exps)
        if not all(math.isfinite(e) for e in exps):
            raise InvalidComparison("exponents must be finite")
        if self.kind == STANDARD:
            if len(exps) != 1 or exps[0] <= 0.0:
                raise InvalidComparison("standard keys need a single alpha > 0")
        elif self.kind == HADAMARD:
            if len(exps) != 2 or min(exps) < 0.0 or max(exps) == 0.0:
                raise InvalidComparison(
                    "hadamard keys are (alpha, beta) >= 0 with (0, 0) excluded"
                )
        elif self.kind == LEX:
            if not exps or min(exps) < 0.0 or max(exps) == 0.0:
                raise InvalidComparison("lex keys are nonnegative, not all zero")
        else:
            raise InvalidComparison(f"unknown key kind {self.kind!r}")

    def _check_comparable(self, other: "ExponentKey") -> None:
        if not isinstance(other, ExponentKey):
            raise InvalidComparison(f"cannot compare key with {type(other).__name__}")
        if self.kind != other.kind or len(self.exponents) != len(other.exponents):
            raise InvalidComparison(
                f"cannot compare {self.kind} key of size {len(self.exponents)} "
                f"with {other.kind} key of size {len(other.exponents)}"
            )

    def __lt__(self, other: "ExponentKey") -> bool:
        self._check_comparable(other)
        return self.exponents < other.exponents

    def __le__(self, other: "ExponentKey") -> bool:
        self._check_comparable(other)
        return self.exponents <= other.exponents

    def __gt__(self, other: "ExponentKey") -> bool:
        self._check_comparable(other)
        return self.exponents > other.exponents

    def __ge__(self, other: "ExponentKey") -> bool:
        self._check_comparable(other)
        return self.exponents >= other.exponents

    def __str__(self) -> str:
        if self.kind == STANDARD:
            return f"{self.exponents[0]:g}"
        return "(" + ", ".join(f"{e:g}" for e in self.exponents) + ")"


def standard_key(alpha: float) -> ExponentKey:
    return ExponentKey(STANDARD, (alpha,))


def hadamard_key(alpha: float, beta: float) -> ExponentKey:
    return ExponentKey(HADAMARD, (alpha, beta))


def lex_key(*alphas: float) -> ExponentKey:
    return ExponentKey(LEX, tuple(alphas))


def compare(a: ExponentKey, b: ExponentKey) -> Ordering:
    """Total order on one family: plain on alpha, lexicographic otherwise."""
    a._check_comparable(b)
    if a.exponents < b.exponents:
        return Ordering.LESS
    if a.exponents > b.exponents:
        return Ordering.GREATER
    return Ordering.EQUAL


@dataclass(frozen=True)
class ScaleSystem:
    """A family of basic infinite functions with its admissible domain.

    ``lambda_min`` is the open lower bound of the parameter domain (0 for the
    standard family, 1 wherever logarithms must stay positive).  Lex systems
    carry their factor evaluators; ``factor_exprs`` keeps the originating
    expression strings when the system was built from a config spec so the
    system can round-trip through JSON.
    """

    kind: str
    lambda_min: float = 0.0
    factors: tuple[Callable[[np.ndarray], np.ndarray], ...] | None = None
    factor_exprs: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in (STANDARD, HADAMARD, LEX):
            raise SystemMismatch(f"unknown scale system kind {self.kind!r}")
        if self.kind == LEX and not self.factors:
            raise SystemMismatch("lex systems need at least one factor evaluator")

    @property
    def arity(self) -> int:
        if self.kind == STANDARD:
            return 1
        if self.kind == HADAMARD:
            return 2
        return len(self.factors)  # type: ignore[arg-type]

    def check_domain(self, lam) -> np.ndarray:
        arr = np.asarray(lam, dtype=float)
        if np.any(arr <= self.lambda_min) or not np.all(np.isfinite(arr)):
            raise DomainError(
                f"lambda must lie in ({self.lambda_min:g}, inf) for this system"
            )
        return arr

    def factor_values(self, lam) -> list[np.ndarray]:
        """Evaluate the raw growth factors F_j at ``lam`` (domain checked)."""
        arr = self.check_domain(lam)
        if self.kind == STANDARD:
            return [arr]
        if self.kind == HADAMARD:
            return [arr, np.log(arr)]
        return [np.asarray(f(arr), dtype=float) for f in self.factors]  # type: ignore[union-attr]


def standard_system() -> ScaleSystem:
    return ScaleSystem(STANDARD, lambda_min=0.0)


def hadamard_system() -> ScaleSystem:
    return ScaleSystem(HADAMARD, lambda_min=1.0)


def lex_system(
    factors: Sequence[Callable[[np.ndarray], np.ndarray]],
    lambda_min: float = 1.0,
    factor_exprs: Sequence[str] | None = None,
) -> ScaleSystem:
    return ScaleSystem(
        LEX,
        lambda_min=lambda_min,
        factors=tuple(factors),
        factor_exprs=tuple(factor_exprs) if factor_exprs is not None else None,
    )


def hadamard_lex_system() -> ScaleSystem:
    """The shipped two-factor lex instance F = (lam, log lam)."""
    return lex_system(
        (lambda t: np.asarray(t, dtype=float), np.log),
        lambda_min=1.0,
        factor_exprs=("x", "ln(x)"),
    )


def _match(system: ScaleSystem, key: ExponentKey) -> None:
    kind_ok = (
        (system.kind == STANDARD and key.kind == STANDARD)
        or (system.kind == HADAMARD and key.kind == HADAMARD)
        or (system.kind == LEX and key.kind == LEX)
    )
    if not kind_ok or (system.kind == LEX and len(key.exponents) != system.arity):
        raise SystemMismatch(
            f"{key.kind} key of size {len(key.exponents)} does not fit a "
            f"{system.kind} system of arity {system.arity}"
        )


def evaluate_scale(system: ScaleSystem, key: ExponentKey, lam):
    """Value of the basic infinite function rho_key at ``lam`` (scalar or array)."""
    _match(system, key)
    factors = system.factor_values(lam)
    out = np.ones_like(factors[0])
    for f, a in zip(factors, key.exponents):
        if a != 0.0:
            out = out * np.power(f, a)
    if np.ndim(lam) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class DominanceReport:
    ratios: tuple[float, ...]
    monotone_decay: bool


def dominance_check(
    system: ScaleSystem,
    a: ExponentKey,
    b: ExponentKey,
    grid: Sequence[float],
) -> DominanceReport:
    """Ratios rho_a / rho_b on ``grid`` plus a tail monotone-decay verdict.

    With ``a`` below ``b`` in the family order the ratios must die off; the
    verdict checks strict decrease over the last quartile of the grid.
    """
    arr = np.asarray(grid, dtype=float)
    ratios = evaluate_scale(system, a, arr) / evaluate_scale(system, b, arr)
    tail = ratios[-max(2, len(ratios) // 4) :]
    monotone = bool(np.all(np.diff(tail) < 0.0))
    return DominanceReport(tuple(float(r) for r in ratios), monotone)


def system_spec(system: ScaleSystem) -> dict:
    """JSON-able description: {"variant", "lambda_min", "lex_scales"}."""
    spec = {"variant": system.kind, "lambda_min": system.lambda_min}
    if system.kind == LEX:
        spec["lex_scales"] = (
            list(system.factor_exprs) if system.factor_exprs is not None else None
        )
    return spec


def system_from_spec(spec: dict) -> ScaleSystem:
    variant = spec.get("variant", STANDARD)
    if variant == STANDARD:
        return standard_system()
    if variant == HADAMARD:
        sys_ = hadamard_system()
        if "lambda_min" in spec:
            sys_ = ScaleSystem(HADAMARD, lambda_min=float(spec["lambda_min"]))
        return sys_
    if variant == LEX:
        from .expr import compile_expression

        exprs = spec.get("lex_scales")
        if not exprs:
            raise SystemMismatch("lex system specs need 'lex_scales' expressions")
        factors = tuple(compile_expression(e, variable="x") for e in exprs)
        return lex_system(
            factors,
            lambda_min=float(spec.get("lambda_min", 1.0)),
            factor_exprs=tuple(exprs),
        )
    raise SystemMismatch(f"unknown scale system variant {variant!r}")
