"""Randomized law checks: uniqueness round-trips, linearity, bounded finite parts.

Each check runs a number of independent trials from a deterministic per-trial
seed and returns a :class:`LawReport`; failures carry the seed and an input
digest so any trial can be reproduced standalone.  Reports are plain data,
never exceptions: a failed law is a result, not a crash.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .decomp import Decomposition, Term, combine_linear, normalize
from .errors import FinitePartError
from .extract import (
    DEFAULT_CONFIG,
    ExtractConfig,
    SampledSequence,
    decompose,
    geometric_grid,
    integer_geometric_grid,
    sample_function,
)
from .decomp import reconstruct
from .reg.sums import dirac_comb_sequence, euler_maclaurin_sequence
from .scales import (
    HADAMARD,
    STANDARD,
    ExponentKey,
    ScaleSystem,
    evaluate_scale,
    hadamard_key,
    standard_key,
    standard_system,
)

__all__ = [
    "LawFailure",
    "LawReport",
    "check_uniqueness",
    "check_linearity",
    "check_bounded_finite_parts",
    "draw_decomposition",
    "euler_maclaurin_family",
    "dirac_comb_family",
    "constant_family",
    "run_all",
]

_COEFF_RTOL = 1e-6
_SEPARATION = math.log(1e3)


@dataclass(frozen=True)
class LawFailure:
    trial: int
    seed: int
    digest: str
    observed: str
    expected: str
    tolerance: str
    message: str = ""


@dataclass(frozen=True)
class LawReport:
    name: str
    trials: int
    failures: tuple[LawFailure, ...] = ()
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "passed": self.passed,
            "failures": [vars(f) for f in self.failures],
            "details": self.details,
        }


def _rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def _digest(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=repr).encode()).hexdigest()[:16]


def _lattice(max_q: int = 6, top: float = 3.0) -> list[float]:
    vals = {Fraction(j, q) for q in range(1, max_q + 1) for j in range(1, int(top * q) + 1)}
    return sorted(v.numerator / v.denominator for v in vals)


def _separated(system: ScaleSystem, keys: Sequence[ExponentKey], lam_max: float) -> bool:
    logs = [float(np.log(f)) for f in system.factor_values(lam_max)]
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            gap = abs(sum((x - y) * g for x, y, g in zip(a.exponents, b.exponents, logs)))
            if gap < _SEPARATION:
                return False
    return True


def draw_decomposition(
    system: ScaleSystem,
    rng: np.random.Generator,
    lam_max: float,
    max_terms: int = 5,
) -> Decomposition:
    """Random well-separated decomposition matching the round-trip contract.

    Exponents come from the small-denominator lattice, coefficients from
    [1, 10], and any pair of keys whose scale values differ by less than three
    decades at the top of the grid is redrawn.
    """
    k = int(rng.integers(1, max_terms + 1))
    for _ in range(400):
        if system.kind == STANDARD:
            alphas = rng.choice(_lattice(), size=k, replace=False)
            keys = [standard_key(float(a)) for a in np.atleast_1d(alphas)]
        elif system.kind == HADAMARD:
            seen = set()
            keys = []
            while len(keys) < k:
                a = float(rng.choice([0.0] + _lattice()))
                b = float(rng.integers(0, 4))
                if (a, b) != (0.0, 0.0) and (a, b) not in seen:
                    seen.add((a, b))
                    keys.append(hadamard_key(a, b))
        else:
            raise ValueError("random decompositions support standard and hadamard systems")
        if _separated(system, keys, lam_max):
            break
    else:
        raise RuntimeError("could not draw separated keys")
    coeffs = rng.uniform(1.0, 10.0, size=k)
    terms = [Term(key, float(c)) for key, c in zip(keys, coeffs)]
    finite_part = float(rng.uniform(-5.0, 5.0))
    return normalize(system, terms, finite_part)


def _terms_match(expected: Decomposition, got: Decomposition, rtol: float) -> str | None:
    if expected.keys != got.keys:
        return f"key sets differ: {list(map(str, expected.keys))} vs {list(map(str, got.keys))}"
    for te, tg in zip(expected.terms, got.terms):
        tol = max(rtol * abs(te.coefficient), 3.0 * tg.stderr)
        if abs(te.coefficient - tg.coefficient) > tol:
            return (
                f"coefficient at {te.key} off: {tg.coefficient!r} vs {te.coefficient!r}"
            )
    tol_y = max(1e-6, 3.0 * got.finite_part_stderr)
    if abs(expected.finite_part - got.finite_part) > tol_y:
        return f"finite part off: {got.finite_part!r} vs {expected.finite_part!r}"
    return None


def check_uniqueness(
    system: ScaleSystem,
    trials: int,
    seed: int,
    grid: np.ndarray | None = None,
    config: ExtractConfig = DEFAULT_CONFIG,
) -> LawReport:
    """Round-trip law: decomposing samples of a model recovers the model."""
    if grid is None:
        grid = geometric_grid(count=60)
    failures = []
    for trial in range(trials):
        rng = _rng(seed, trial)
        drawn = draw_decomposition(system, rng, float(grid[-1]))
        payload = {
            "keys": [k.exponents for k in drawn.keys],
            "coeffs": [t.coefficient for t in drawn.terms],
            "finite_part": drawn.finite_part,
        }
        seq = SampledSequence(grid, reconstruct(drawn, grid))
        try:
            got = decompose(seq, system, config)
            problem = _terms_match(drawn, got, _COEFF_RTOL)
        except FinitePartError as exc:
            problem = f"extraction failed: {type(exc).__name__}: {exc}"
            got = None
        if problem:
            failures.append(
                LawFailure(
                    trial=trial,
                    seed=seed,
                    digest=_digest(payload),
                    observed=str(got),
                    expected=str(payload),
                    tolerance=f"rel {_COEFF_RTOL}",
                    message=problem,
                )
            )
    return LawReport(f"uniqueness-{system.kind}", trials, tuple(failures))


def check_linearity(
    trials: int,
    seed: int,
    grid: np.ndarray | None = None,
    config: ExtractConfig = DEFAULT_CONFIG,
) -> LawReport:
    """Linearity law: decompose(s1 + c*s2) == combine_linear of the parts."""
    system = standard_system()
    if grid is None:
        grid = geometric_grid(count=60)
    failures = []
    for trial in range(trials):
        rng = _rng(seed, trial)
        union = draw_decomposition(system, rng, float(grid[-1]), max_terms=4)
        keys = list(union.keys)
        pick = rng.integers(0, 3, size=len(keys))  # 0 -> d1, 1 -> d2, 2 -> both
        keys1 = [k for k, p in zip(keys, pick) if p in (0, 2)] or keys[:1]
        keys2 = [k for k, p in zip(keys, pick) if p in (1, 2)] or keys[-1:]
        c1 = {k: float(rng.uniform(1.0, 10.0)) for k in keys1}
        c2 = {k: float(rng.uniform(1.0, 10.0)) for k in keys2}
        y1, y2 = (float(v) for v in rng.uniform(-5.0, 5.0, size=2))
        c = 0.0
        for _ in range(40):
            c = float(rng.uniform(-3.0, 3.0))
            if abs(c) < 0.25:
                continue
            shared_ok = all(
                abs(c1[k] + c * c2[k]) > 1e-2 * max(abs(c1[k]), abs(c * c2[k]))
                for k in set(keys1) & set(keys2)
            )
            if shared_ok:
                break
        d1 = normalize(system, [Term(k, v) for k, v in c1.items()], y1)
        d2 = normalize(system, [Term(k, v) for k, v in c2.items()], y2)
        payload = {"trial": trial, "c": c, "k1": [k.exponents for k in keys1], "k2": [k.exponents for k in keys2]}
        s1 = SampledSequence(grid, reconstruct(d1, grid))
        s2 = SampledSequence(grid, reconstruct(d2, grid))
        try:
            dec1 = decompose(s1, system, config)
            dec2 = decompose(s2, system, config)
            dec12 = decompose(s1 + s2.scaled(c), system, config)
            expected = combine_linear(dec1, dec2, c)
            problem = _terms_match(expected, dec12, _COEFF_RTOL)
        except FinitePartError as exc:
            problem = f"extraction failed: {type(exc).__name__}: {exc}"
        if problem:
            failures.append(
                LawFailure(
                    trial=trial,
                    seed=seed,
                    digest=_digest(payload),
                    observed=problem,
                    expected="combine_linear identity",
                    tolerance=f"rel {_COEFF_RTOL}",
                    message=problem,
                )
            )
    return LawReport("linearity", trials, tuple(failures))


def euler_maclaurin_family(max_degree: int = 4, beta: float = 0.3) -> list[SampledSequence]:
    """Sampling-sum sequences for the monomial basis up to ``max_degree``."""
    grid = integer_geometric_grid(2, 8192)
    out = []
    for p in range(max_degree + 1):
        vals = [euler_maclaurin_sequence(lambda x, p=p: x**p, beta, int(n)) for n in grid]
        out.append(SampledSequence(grid, np.asarray(vals)))
    return out


def dirac_comb_family(max_node: int = 3) -> list[SampledSequence]:
    """One sequence per lattice node ``k <= max_node`` with unit weight."""
    grid = geometric_grid(start=2.0, count=68)
    return [
        sample_function(lambda lam, k=k: dirac_comb_sequence({k: 1.0}, lam), grid)
        for k in range(1, max_node + 1)
    ]


def constant_family(values: Sequence[float] = (1.0, -2.0, 3.5)) -> list[SampledSequence]:
    grid = geometric_grid(count=40)
    return [SampledSequence(grid, np.full_like(grid, v)) for v in values]


def check_bounded_finite_parts(
    family: Sequence[SampledSequence],
    basis_dim: int,
    system: ScaleSystem | None = None,
    config: ExtractConfig = DEFAULT_CONFIG,
) -> LawReport:
    """Uniform boundedness of finite-part residuals over a family.

    Decomposes every member, measures the residual tail after removing the
    growing terms, and reports the union of detected exponent sets.  A family
    whose members keep introducing new exponents is reported, not failed;
    what fails the law is an unbounded residual or an extraction error.
    """
    failures = []
    key_union: set[tuple[float, ...]] = set()
    sup_tail = 0.0
    max_fp = 0.0
    for idx, seq in enumerate(family):
        sys_ = system if system is not None else standard_system()
        try:
            dec = decompose(seq, sys_, config)
        except FinitePartError as exc:
            failures.append(
                LawFailure(
                    trial=idx,
                    seed=0,
                    digest=_digest({"member": idx}),
                    observed=f"{type(exc).__name__}: {exc}",
                    expected="decomposable member",
                    tolerance="n/a",
                    message="family member failed to decompose",
                )
            )
            continue
        key_union.update(k.exponents for k in dec.keys)
        model = np.zeros_like(seq.values)
        for t in dec.terms:
            model = model + t.coefficient * evaluate_scale(dec.system, t.key, seq.lambdas)
        z = seq.values - model
        quart = max(2, len(seq) // 4)
        sup_tail = max(sup_tail, float(np.max(np.abs(z[-quart:]))))
        max_fp = max(max_fp, abs(dec.finite_part))
    bound = 100.0 * (1.0 + max_fp)
    if sup_tail > bound:
        failures.append(
            LawFailure(
                trial=-1,
                seed=0,
                digest="",
                observed=f"sup tail residual {sup_tail:.3g}",
                expected=f"<= {bound:.3g}",
                tolerance="uniform bound",
                message="finite-part residuals are not uniformly bounded",
            )
        )
    details = {
        "basis_dim": basis_dim,
        "key_union": sorted(key_union, reverse=True),
        "key_union_size": len(key_union),
        "sup_tail_residual": sup_tail,
    }
    return LawReport("bounded-finite-parts", len(family), tuple(failures), details)


def run_all(trials: int = 50, seed: int = 20240809) -> list[LawReport]:
    """The self-test battery used by the command line front end."""
    from .scales import hadamard_system

    reports = [
        check_uniqueness(standard_system(), trials, seed),
        check_uniqueness(hadamard_system(), max(trials // 4, 0), seed + 1, grid=geometric_grid(count=68)),
        check_linearity(trials, seed + 2),
    ]
    if trials > 0:
        em = check_bounded_finite_parts(euler_maclaurin_family(), basis_dim=5)
        em = LawReport("bounded-euler-maclaurin", em.trials, em.failures, em.details)
        comb = check_bounded_finite_parts(dirac_comb_family(), basis_dim=3)
        comb = LawReport("bounded-comb-nodes", comb.trials, comb.failures, comb.details)
        const = check_bounded_finite_parts(constant_family(), basis_dim=3)
        const = LawReport("bounded-constant", const.trials, const.failures, const.details)
        reports.extend([em, comb, const])
    return reports
