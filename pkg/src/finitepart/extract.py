"""Leading-scale detection, coefficient extraction, and the peel loop.

Given finitely many samples of a scalar quantity on a geometric grid, the
entry point :func:`decompose` identifies the leading basic infinite function,
extracts its coefficient, subtracts the term, and repeats until the residual
looks bounded, then extrapolates the finite part.  Detected exponents are
snapped to small-denominator rationals; once the full key set is known the
coefficients and the finite part are re-estimated by one weighted joint fit,
which is what achieves near machine precision on exact model data.

Inputs outside the model class fail loudly: residual tails that refuse to
settle raise ``Nonconvergent``, a loop that cannot make strict order progress
raises ``StalledExtraction``, and super-power growth burns through the term
budget and raises ``MaxTermsExceeded``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .decomp import Decomposition, Diagnostics, Term, normalize
from .errors import (
    InsufficientData,
    InvalidComparison,
    MaxTermsExceeded,
    Nonconvergent,
    NonPositiveLogLog,
    StalledExtraction,
)
from .scales import (
    HADAMARD,
    LEX,
    STANDARD,
    ExponentKey,
    ScaleSystem,
    evaluate_scale,
)

__all__ = [
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
]

_MIN_SAMPLES = 8
# Tuning shared by the detection heuristics; deliberately not part of the
# public config because changing them invalidates the calibrated tolerances.
_WINDOW_DRIFT_FACTOR = 6.0
_WINDOW_EXTRA_POWER = 0.02
_WINDOW_EXTRA_LOG = 0.3
_MAX_VALUES_PER_COORD = 9
_MAX_CANDIDATES = 40
_SIGNIFICANCE = 2.0
_BLOWUP_RATIO = 100.0
_BLOWUP_MEMBER = 1.5
_LOG_FACTOR_FLOOR = 0.02
_EXPONENT_HARD_CAP = 1.0e4


@dataclass(frozen=True)
class SampledSequence:
    """Samples ``(lambda_k, y_k)`` with strictly increasing ``lambda_k``."""

    lambdas: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        val = np.atleast_1d(np.asarray(self.values))
        if val.dtype.kind not in "fc":
            val = val.astype(complex if val.dtype.kind == "c" else float)
        if lam.shape != val.shape or lam.ndim != 1:
            raise ValueError("lambdas and values must be 1-d arrays of equal length")
        if not np.all(np.isfinite(lam)) or np.any(np.diff(lam) <= 0.0):
            raise ValueError("lambdas must be finite and strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("sample values must be finite")
        lam.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", val)

    def __len__(self) -> int:
        return len(self.lambdas)

    def tail(self, fraction: float) -> "SampledSequence":
        count = max(_MIN_SAMPLES // 2, math.ceil(len(self) * fraction))
        count = min(count, len(self))
        return SampledSequence(self.lambdas[-count:], self.values[-count:])

    def scaled(self, c) -> "SampledSequence":
        return SampledSequence(self.lambdas, self.values * c)

    def __add__(self, other: "SampledSequence") -> "SampledSequence":
        if not np.array_equal(self.lambdas, other.lambdas):
            raise ValueError("sequences must share a grid")
        return SampledSequence(self.lambdas, self.values + other.values)

    def __sub__(self, other: "SampledSequence") -> "SampledSequence":
        return self + other.scaled(-1.0)


def geometric_grid(start: float = 2.0, ratio: float = math.sqrt(2.0), count: int = 40) -> np.ndarray:
    """The default sampling grid ``start * ratio**k``."""
    if count < 1 or ratio <= 1.0 or start <= 0.0:
        raise ValueError("need start > 0, ratio > 1, count >= 1")
    return start * ratio ** np.arange(count)


def integer_geometric_grid(start: int = 2, stop: int = 32768, ratio: float = math.sqrt(2.0)) -> np.ndarray:
    """Unique integers following a geometric progression, inclusive of ``stop``."""
    pts: list[int] = []
    x = float(start)
    while x <= stop + 0.5:
        n = int(round(x))
        if not pts or n > pts[-1]:
            pts.append(n)
        x *= ratio
    if pts and pts[-1] != stop:
        pts.append(int(stop))
    return np.asarray(pts, dtype=float)


def sample_function(fn: Callable, grid: Sequence[float]) -> SampledSequence:
    lam = np.asarray(grid, dtype=float)
    try:
        vals = np.asarray(fn(lam))
        if vals.shape != lam.shape:
            raise TypeError
    except Exception:
        vals = np.asarray([fn(x) for x in lam])
    return SampledSequence(lam, vals)


@dataclass(frozen=True)
class ExtractConfig:
    """Extraction knobs; the defaults are calibrated for 6..12 decade grids."""

    max_terms: int = 16
    snap_denominator: int = 12
    snap_tol: float = 1e-3
    zero_tol: float = 1e-8
    tail_fraction: float = 0.5
    limit_model: str = "richardson"
    min_order: float = 1e-3

    def __post_init__(self) -> None:
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ValueError("tail_fraction must lie in (0, 1]")
        if self.limit_model not in ("richardson", "tail_mean"):
            raise ValueError("limit_model must be 'richardson' or 'tail_mean'")


DEFAULT_CONFIG = ExtractConfig()


def _require_samples(seq: SampledSequence, n: int = _MIN_SAMPLES) -> None:
    if len(seq) < n:
        raise InsufficientData(f"need at least {n} samples, got {len(seq)}")


def _ols(columns: Sequence[np.ndarray], target: np.ndarray):
    """Least squares with column scaling; returns (coeffs, rms_residual, r2)."""
    a = np.column_stack(columns)
    scale = np.linalg.norm(a, axis=0)
    scale[scale == 0.0] = 1.0
    sol, *_ = np.linalg.lstsq(a / scale, target, rcond=None)
    coeffs = sol / scale
    resid = target - a @ coeffs
    rms = float(np.sqrt(np.mean(np.abs(resid) ** 2)))
    centered = target - np.mean(target)
    ss_tot = float(np.sum(np.abs(centered) ** 2))
    ss_res = float(np.sum(np.abs(resid) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return coeffs, rms, r2


def estimate_order(seq: SampledSequence, config: ExtractConfig = DEFAULT_CONFIG):
    """Slope of ``log(|y| + 1)`` against ``log(lambda)`` over the tail.

    The slope is the growth order of the sequence; anything at or below
    ``config.min_order`` should be treated as bounded by the caller.
    """
    _require_samples(seq)
    tail = seq.tail(config.tail_fraction)
    x = np.log(tail.lambdas)
    y = np.log(np.abs(tail.values) + 1.0)
    coeffs, _, r2 = _ols([np.ones_like(x), x], y)
    return float(coeffs[1].real), r2


def estimate_log_order(seq: SampledSequence, alpha: float, config: ExtractConfig = DEFAULT_CONFIG):
    """Second-stage slope against ``log log lambda`` after dividing out ``lambda**alpha``."""
    _require_samples(seq)
    tail = seq.tail(config.tail_fraction)
    if np.any(tail.lambdas <= math.e):
        raise NonPositiveLogLog("second-stage regression needs lambda > e on the tail")
    x = np.log(np.log(tail.lambdas))
    y = np.log(tail.lambdas ** (-alpha) * np.abs(tail.values) + 1.0)
    coeffs, _, r2 = _ols([np.ones_like(x), x], y)
    return float(coeffs[1].real), r2


def snap_exponent(raw: float, config: ExtractConfig = DEFAULT_CONFIG):
    """Snap ``raw`` to the nearest p/q with q <= snap_denominator, if close enough."""
    if not math.isfinite(raw):
        raise ValueError("raw exponent must be finite")
    frac = Fraction(raw).limit_denominator(config.snap_denominator)
    snapped = frac.numerator / frac.denominator
    if abs(raw - snapped) <= config.snap_tol:
        return snapped, True
    return float(raw), False


def _decay_shapes(lam: np.ndarray, extra_gammas: Iterable[float] = ()) -> list[np.ndarray]:
    """Single-term remainder models h(lambda) used by the tail extrapolations."""
    gammas = {1 / 12, 1 / 6, 1 / 4, 1 / 3, 1 / 2, 2 / 3, 1.0, 1.5, 2.0, 3.0}
    gammas.update(g for g in extra_gammas if 1e-3 < g <= 4.0)
    shapes = []
    with_logs = float(lam[0]) > 1.05
    log_lam = np.log(lam) if with_logs else None
    for g in sorted(gammas):
        base = lam ** (-g)
        shapes.append(base)
        if with_logs:
            shapes.append(base / log_lam)
    if with_logs:
        shapes.extend([log_lam ** (-1.0), log_lam ** (-2.0), log_lam ** (-3.0)])
    return shapes


@dataclass(frozen=True)
class _TailFit:
    coeff: complex
    stderr: float
    rel_residual: float
    grow_ratio: float


def _tail_extrapolate(
    lam: np.ndarray,
    w: np.ndarray,
    extra_columns: Sequence[np.ndarray] = (),
    extra_gammas: Iterable[float] = (),
    honest_stderr: bool = False,
    row_sigma: np.ndarray | None = None,
    noise_scale: float = 0.0,
) -> _TailFit:
    """Fit ``w = c + d * h(lambda) (+ contamination columns)``, best shape wins.

    With ``honest_stderr`` the reported dispersion also covers systematic bias,
    estimated by refitting on two overlapping sub-windows: residual scatter
    alone badly understates the error of an extrapolated intercept.
    ``row_sigma`` gives per-sample uncertainties (rows are weighted by their
    inverse); ``noise_scale`` stops the shape search once the constant fit is
    already down at the noise, so noise never drags the intercept around.
    """
    scale_w = float(np.max(np.abs(w)))
    if scale_w == 0.0:
        return _TailFit(0.0, 0.0, 0.0, 0.0)
    ws = w / scale_w
    ones = np.ones_like(lam)
    base_cols = [c for c in extra_columns if np.all(np.isfinite(c))]
    if row_sigma is not None:
        u = 1.0 / np.maximum(row_sigma, 1e-3 * float(np.median(row_sigma)) + 1e-300)
        u = u / np.max(u)
    else:
        u = np.ones_like(lam)
    u2 = float(np.sum(u**2))

    def try_fit(shape_cols, rows=slice(None)):
        cols = [(ones * u)[rows]] + [(s * u)[rows] for s in shape_cols]
        cols += [(c * u)[rows] for c in base_cols]
        target = (ws * u)[rows]
        if len(cols) > len(target) - 1:
            return None
        a = np.column_stack(cols)
        scale = np.linalg.norm(a, axis=0)
        scale[scale == 0.0] = 1.0
        sol, *_ = np.linalg.lstsq(a / scale, target, rcond=None)
        coeffs = sol / scale
        resid = target - a @ coeffs
        rms = float(np.sqrt(np.sum(np.abs(resid) ** 2) / u2))
        return rms, coeffs[0]

    def shape_search():
        const_fit = try_fit([])
        if const_fit is not None and const_fit[0] * scale_w <= noise_scale:
            return const_fit, []
        singles = []
        for h in _decay_shapes(lam, extra_gammas):
            fit = try_fit([h])
            if fit is not None:
                singles.append((fit[0], fit[1], h))
        singles.sort(key=lambda t: t[0])
        best = const_fit
        shapes: list[np.ndarray] = []
        if singles and (best is None or singles[0][0] < best[0]):
            best, shapes = (singles[0][0], singles[0][1]), [singles[0][2]]
        # harmonics of a good base model the full remainder ladder
        # (1/lam, 1/lam^2, ... or 1/log, 1/log^2, ...) almost exactly; the
        # right base need not win the single-shape round (the remainder may
        # start at a higher harmonic), so ladder the best singles plus the
        # canonical and gap-derived pure powers
        bases = [h for _, _, h in singles[:4]]
        for g in list(extra_gammas)[:4] + [0.5, 1.0, 2.0]:
            if 1e-3 < g <= 4.0:
                bases.append(lam ** (-g))
        if float(lam[0]) > 1.05:
            bases.append(np.log(lam) ** (-1.0))
        seen_bases: list[np.ndarray] = []
        for h in bases:
            if any(b is h or np.array_equal(b, h) for b in seen_bases):
                continue
            seen_bases.append(h)
            for depth in (2, 3, 4):
                ladder = [h**k for k in range(1, depth + 1)]
                fit = try_fit(ladder)
                if fit is not None and best is not None and fit[0] < best[0]:
                    best, shapes = fit, ladder
        # a shape must clearly beat the plain constant, otherwise it is
        # fitting noise and dragging the intercept with it
        if const_fit is not None and best is not None and best[0] > 0.3 * const_fit[0]:
            return const_fit, []
        return best, shapes

    best, best_shapes = shape_search()
    if best is not None and row_sigma is not None:
        # robust second pass: rows the adopted model cannot explain lose
        # weight, so sharp weights never let model error bias the intercept
        cols = [ones] + best_shapes + base_cols
        coeffs, _, _ = _ols([(c * u) for c in cols], ws * u)
        model_gap = np.abs(ws - np.column_stack(cols) @ coeffs) * scale_w
        u = 1.0 / np.maximum(row_sigma + 0.25 * model_gap, 1e-300)
        u = u / np.max(u)
        u2 = float(np.sum(u**2))
        best, best_shapes = shape_search()
    if best is None:
        # too few rows even for the constant model: report the weighted mean
        # with its full dispersion so the caller treats it as barely known
        mean = complex(np.sum(ws * u**2) / u2)
        spread = float(np.sqrt(np.sum(np.abs(ws - mean) ** 2 * u**2) / u2))
        best, best_shapes = (max(spread, 1e-16), mean), []
    rms, intercept = best
    if honest_stderr and len(lam) >= 3 * _MIN_SAMPLES // 2:
        third = len(lam) // 3
        bias = 0.0
        for rows in (slice(0, len(lam) - third), slice(third, None)):
            part = try_fit(best_shapes, rows)
            if part is not None:
                bias = max(bias, abs(part[1] - intercept))
        rms = max(rms, bias)
    rms_w = float(np.sqrt(np.mean(np.abs(ws) ** 2)))
    rel = rms / max(rms_w, 1e-300)
    mag = np.abs(w)
    median = float(np.median(mag))
    grow = float(np.max(mag[-2:]) / max(median, 1e-300))
    coeff = intercept * scale_w
    if abs(coeff.imag) == 0.0:
        coeff = coeff.real
    return _TailFit(coeff, rms * scale_w, rel, grow)


def _masked_tail(seq: SampledSequence, config: ExtractConfig) -> SampledSequence:
    return seq.tail(config.tail_fraction)


def _extract_against(
    seq: SampledSequence,
    system: ScaleSystem,
    key: ExponentKey,
    prior_keys: Sequence[ExponentKey],
    config: ExtractConfig,
    extra_gammas: Iterable[float] = (),
    honest_stderr: bool = False,
    value_sigma: np.ndarray | None = None,
) -> _TailFit:
    tail = _masked_tail(seq, config)
    rho = np.asarray(evaluate_scale(system, key, tail.lambdas), dtype=float)
    w = tail.values / rho
    if not np.all(np.isfinite(w)):
        return _TailFit(0.0, float("inf"), float("inf"), float("inf"))
    contamination = []
    budget = max(0, len(tail) - 5)
    for p in list(prior_keys)[-min(6, budget) :] if budget else []:
        ratio = np.asarray(evaluate_scale(system, p, tail.lambdas), dtype=float) / rho
        peak = np.max(ratio)
        if np.isfinite(peak) and peak > 0.0:
            contamination.append(ratio / peak)
    row_sigma = value_sigma[-len(tail) :] / rho if value_sigma is not None else None
    return _tail_extrapolate(
        tail.lambdas, w, contamination, extra_gammas, honest_stderr, row_sigma
    )


def extract_coefficient(
    seq: SampledSequence,
    system: ScaleSystem,
    key: ExponentKey,
    config: ExtractConfig = DEFAULT_CONFIG,
):
    """Extrapolated limit of ``y / rho_key`` over the tail, with its dispersion."""
    _require_samples(seq)
    fit = _extract_against(seq, system, key, (), config)
    return fit.coeff, fit.stderr


def peel(
    seq: SampledSequence,
    system: ScaleSystem,
    key: ExponentKey,
    coeff,
) -> SampledSequence:
    """Subtract ``coeff * rho_key`` from the samples; the grid is unchanged."""
    rho = evaluate_scale(system, key, seq.lambdas)
    return SampledSequence(seq.lambdas, seq.values - coeff * rho)


def _spread(values: np.ndarray) -> float:
    if len(values) == 0:
        return 0.0
    return float(np.ptp(values.real) + (np.ptp(values.imag) if np.iscomplexobj(values) else 0.0))


def _settles(values: np.ndarray, noise_floor: float) -> bool:
    """True when the last-quartile spread does not exceed the first-quartile one.

    Spreads at or below ``noise_floor`` count as zero; they are peel or
    representation noise, not dispersion.
    """
    quart = max(2, len(values) // 4)
    first = _spread(values[:quart])
    last = _spread(values[-quart:])
    eff_first = first if first > noise_floor else 0.0
    eff_last = last if last > noise_floor else 0.0
    return not eff_last > eff_first


def estimate_limit(
    seq: SampledSequence,
    config: ExtractConfig = DEFAULT_CONFIG,
    noise_floor: float = 0.0,
    row_sigma: np.ndarray | None = None,
):
    """Finite-part estimate of an already bounded tail.

    Raises ``Nonconvergent`` when the last-quartile spread exceeds the
    first-quartile spread (both measured above ``noise_floor``), i.e. the tail
    is not settling.  ``richardson`` fits ``Y + c * h(lambda)`` over the tail
    with the best-fitting decay shape; ``tail_mean`` averages the last
    quartile.  ``row_sigma`` optionally downweights samples by their known
    uncertainty.  Divergence slower than ``config.min_order`` (or oscillation
    slower than the sampled span) is below desk-scale resolution and will be
    reported as convergent.
    """
    _require_samples(seq)
    quart = max(2, len(seq) // 4)
    if not _settles(seq.values, noise_floor):
        raise Nonconvergent(
            f"tail dispersion grew from {_spread(seq.values[:quart]):.3g} "
            f"to {_spread(seq.values[-quart:]):.3g}; no finite limit"
        )
    if config.limit_model == "tail_mean":
        tail_vals = seq.values[-quart:]
        y = np.mean(tail_vals)
        err = float(np.std(tail_vals))
        return (y if np.iscomplexobj(tail_vals) else float(y.real)), err
    tail = seq.tail(config.tail_fraction)
    sigma = row_sigma[-len(tail) :] if row_sigma is not None else None
    # with per-row uncertainties the fit is dominated by the cleanest rows,
    # so the do-not-overfit guard must reflect their noise, not the worst row's
    fit_noise = float(np.percentile(sigma, 25)) if sigma is not None else noise_floor
    fit = _tail_extrapolate(
        tail.lambdas,
        tail.values + 0.0,
        honest_stderr=True,
        row_sigma=sigma,
        noise_scale=fit_noise,
    )
    return fit.coeff, fit.stderr


def _joint_slopes(seq: SampledSequence, system: ScaleSystem, config: ExtractConfig):
    """Joint log regression of ln(|y|+1) on all scale-factor logs over the tail.

    Returns (estimates, drifts, r2); drifts compare fits on the two halves of
    the tail and bound how trustworthy each estimate is.
    """
    tail = _masked_tail(seq, config)
    logs = [np.log(f) for f in system.factor_values(tail.lambdas)]
    y = np.log(np.abs(tail.values) + 1.0)

    def fit(sl):
        cols = [np.ones_like(logs[0][sl])] + [g[sl] for g in logs]
        coeffs, _, r2 = _ols(cols, y[sl])
        return np.real(coeffs[1:]).astype(float), r2

    est, r2 = fit(slice(None))
    half = len(y) // 2
    if half >= 3:
        est_a, _ = fit(slice(0, half))
        est_b, _ = fit(slice(half, None))
        drift = np.abs(est_a - est_b)
    else:
        drift = np.full_like(est, 0.1)
    return est, drift, r2


def _is_bounded(est: np.ndarray, config: ExtractConfig) -> bool:
    if est[0] > config.min_order:
        return False
    thresholds = [config.min_order] + [max(config.min_order, _LOG_FACTOR_FLOOR)] * (len(est) - 1)
    return all(abs(e) <= t or e <= t for e, t in zip(est, thresholds))


def _fraction_values(center: float, width: float, qmax: int, lo: float, hi: float) -> list[float]:
    """Lattice values p/q in the window: the nearest ones plus the simplest ones.

    Pure nearest-first pruning would crowd out a simple true exponent (say 1)
    with a cluster of close high-denominator neighbours, so low-q values get
    reserved slots.
    """
    lo_v, hi_v = max(lo, center - width), min(hi, center + width)
    by_q: dict[float, int] = {}
    for q in range(1, qmax + 1):
        p_lo = math.ceil(lo_v * q - 1e-12)
        p_hi = math.floor(hi_v * q + 1e-12)
        for p in range(p_lo, p_hi + 1):
            v = p / q
            if v not in by_q:
                by_q[v] = q
    nearest = sorted(by_q, key=lambda v: (abs(v - center), v))
    simplest = sorted(by_q, key=lambda v: (by_q[v], abs(v - center), v))
    keep: list[float] = []
    for v in nearest[: _MAX_VALUES_PER_COORD // 2 + 1] + simplest[: _MAX_VALUES_PER_COORD // 2 + 1]:
        if v not in keep:
            keep.append(v)
    return sorted(keep, key=lambda v: (abs(v - center), v))


@dataclass(frozen=True)
class _Candidate:
    key: ExponentKey
    snapped: bool


def _candidate_keys(
    seq: SampledSequence,
    system: ScaleSystem,
    config: ExtractConfig,
    below: ExponentKey | None,
    recorded: Sequence[ExponentKey],
) -> tuple[list[_Candidate], np.ndarray, list[str]]:
    est, drift, _ = _joint_slopes(seq, system, config)
    warnings: list[str] = []
    lam_max = float(seq.lambdas[-1])
    power_cap = min(_EXPONENT_HARD_CAP, 240.0 / max(math.log10(lam_max), 1.0))
    if below is not None:
        power_cap = min(power_cap, below.exponents[0])
    factor_growth = [
        float(np.log(hi_v) - np.log(lo_v))
        for lo_v, hi_v in (
            (f_lo, f_hi)
            for f_lo, f_hi in zip(
                system.factor_values(float(seq.lambdas[0])),
                system.factor_values(lam_max),
            )
        )
    ]

    def grows_enough(values: tuple[float, ...]) -> bool:
        # a scale that barely moves across the window cannot be told apart
        # from the finite part, no matter how long the grid is
        return sum(a * g for a, g in zip(values, factor_growth)) >= math.log(1.5)
    per_coord: list[list[tuple[float, bool]]] = []
    for j, (e, d) in enumerate(zip(est, drift)):
        extra = _WINDOW_EXTRA_POWER if j == 0 else _WINDOW_EXTRA_LOG
        width = max(config.snap_tol, _WINDOW_DRIFT_FACTOR * d, extra)
        lo = 0.0
        hi = power_cap if j == 0 else _EXPONENT_HARD_CAP
        vals = [(v, True) for v in _fraction_values(e, width, config.snap_denominator, lo, hi)]
        raw = min(max(e, lo), hi)
        if all(abs(raw - v) > config.snap_tol for v, _ in vals):
            vals.append((raw, False))
        if width > 1.0 and j == 0:
            # wildly unstable slope: spread fallback keys over the admissible
            # range so super-power growth can still be peeled step by step
            for frac in (1.0, 0.75, 0.5, 0.25):
                v = snap_exponent(frac * hi, replace(config, snap_tol=1.0))[0]
                if 0 < v <= hi and all(abs(v - u) > 1e-12 for u, _ in vals):
                    vals.append((v, True))
        per_coord.append(vals)

    combos = itertools.product(*per_coord)
    scored_combos = sorted(
        combos,
        key=lambda combo: sum(abs(v - e) for (v, _), e in zip(combo, est)),
    )
    candidates: list[_Candidate] = []
    seen: set[tuple[float, ...]] = set()
    for combo in scored_combos:
        values = tuple(v for v, _ in combo)
        snapped = all(s for _, s in combo)
        if values in seen:
            continue
        seen.add(values)
        if all(v == 0.0 for v in values):
            continue
        if system.kind == STANDARD and values[0] <= config.min_order:
            continue
        if not grows_enough(values):
            continue
        near_dup = any(
            rec.kind == _kind_for(system)
            and len(rec.exponents) == len(values)
            and max(abs(a - b) for a, b in zip(rec.exponents, values)) < 2 * config.snap_tol
            for rec in recorded
        )
        if near_dup:
            if "near-degenerate exponent candidate merged into recorded term" not in warnings:
                warnings.append("near-degenerate exponent candidate merged into recorded term")
            continue
        try:
            key = ExponentKey(_kind_for(system), values)
        except Exception:
            continue
        if below is not None and not key < below:
            continue
        candidates.append(_Candidate(key, snapped))
        if len(candidates) >= _MAX_CANDIDATES:
            break
    if below is not None:
        # one lattice step below the previous key: the only way to keep making
        # strict progress when the residual's order estimate hugs that key
        step = 1.0 / config.snap_denominator
        probe = list(below.exponents)
        for j in range(len(probe) - 1, -1, -1):
            if probe[j] >= step - 1e-12:
                probe[j] -= step
                break
            probe[j] = 0.0
        if any(v > 0.0 for v in probe) and grows_enough(tuple(probe)):
            try:
                key = ExponentKey(_kind_for(system), tuple(probe))
                if key < below and all(c.key != key for c in candidates):
                    candidates.append(_Candidate(key, True))
            except InvalidComparison:
                pass
    return candidates, est, warnings


def _kind_for(system: ScaleSystem) -> str:
    return {STANDARD: STANDARD, HADAMARD: HADAMARD, LEX: LEX}[system.kind]


def _key_complexity(key: ExponentKey, config: ExtractConfig) -> int:
    """Sum of the smallest denominators realizing each coordinate (99 if none)."""
    total = 0
    for v in key.exponents:
        frac = Fraction(v).limit_denominator(config.snap_denominator)
        total += frac.denominator if frac.numerator / frac.denominator == v else 99
    return total


def _subtract_terms(
    seq: SampledSequence,
    system: ScaleSystem,
    terms: Sequence[tuple[ExponentKey, complex]],
) -> SampledSequence | None:
    vals = seq.values.astype(complex if np.iscomplexobj(seq.values) else float, copy=True)
    for key, coeff in terms:
        vals = vals - coeff * np.asarray(evaluate_scale(system, key, seq.lambdas))
    if not np.all(np.isfinite(vals)):
        return None
    return SampledSequence(seq.lambdas, vals)


def _uncertainty_floor(
    seq: SampledSequence,
    system: ScaleSystem,
    recorded: Sequence[dict],
) -> np.ndarray:
    """Pointwise bound on how much of the residual is peel error, not signal.

    Each subtracted term leaves a ghost of size roughly ``stderr * rho`` (at
    least a few ulps of ``coeff * rho``); below a few times this floor, plus
    the representation noise of the raw samples, the residual is meaningless.
    """
    eps = np.finfo(float).eps
    floor = 30.0 * eps * np.abs(seq.values)
    for r in recorded:
        rho = np.asarray(evaluate_scale(system, r["key"], seq.lambdas), dtype=float)
        floor = floor + 2.0 * max(r["stderr"], 10.0 * eps * abs(r["coeff"])) * rho
    return floor


def _trusted_prefix(
    residual: SampledSequence, floor: np.ndarray, margin: float = 1.0
) -> SampledSequence | None:
    """Samples up to the last index where the residual still beats the floor."""
    valid = np.abs(residual.values) > margin * floor
    if not np.any(valid):
        return None
    end = int(np.max(np.nonzero(valid)[0]))
    if end + 1 < _MIN_SAMPLES:
        return None
    return SampledSequence(residual.lambdas[: end + 1], residual.values[: end + 1])


def _sweep(
    seq: SampledSequence,
    system: ScaleSystem,
    recorded: list[dict],
    config: ExtractConfig,
) -> None:
    """One Gauss-Seidel pass: re-extract every recorded coefficient in place.

    Each coefficient is re-estimated from the samples with all other terms
    subtracted, restricted to the window where its own scale still rises above
    the others' uncertainty floor.  A couple of passes contract the cross-term
    contamination geometrically, which is what keeps long chains of nearby
    exponents extractable.
    """
    full_window = replace(config, tail_fraction=1.0)
    for j, r in enumerate(recorded):
        others = [r2 for i, r2 in enumerate(recorded) if i != j]
        resid_j = _subtract_terms(seq, system, [(r2["key"], r2["coeff"]) for r2 in others])
        if resid_j is None:
            continue
        floor_j = _uncertainty_floor(seq, system, others)
        prefix_j = _trusted_prefix(resid_j, floor_j)
        if prefix_j is None:
            continue
        gaps = [abs(r["key"].exponents[0] - r2["key"].exponents[0]) for r2 in others]
        fit_j = _extract_against(
            prefix_j,
            system,
            r["key"],
            [r2["key"] for r2 in recorded[:j]],
            full_window,
            gaps,
            honest_stderr=True,
            value_sigma=floor_j[: len(prefix_j)] + 1e-300,
        )
        improves = fit_j.stderr <= 3.0 * r["stderr"] + 1e-300
        if math.isfinite(fit_j.rel_residual) and abs(fit_j.coeff) > 0.0 and improves:
            r["coeff"], r["stderr"] = fit_j.coeff, fit_j.stderr


def decompose(
    seq: SampledSequence,
    system: ScaleSystem,
    config: ExtractConfig = DEFAULT_CONFIG,
) -> Decomposition:
    """Full peel loop: detect, extract, subtract, repeat; then the finite part.

    Every iteration must strictly decrease the leading key; the recorded keys
    therefore form a finite strictly decreasing chain, mirroring the fact that
    each decomposable quantity has only finitely many scale terms.
    """
    _require_samples(seq)
    system.check_domain(seq.lambdas)
    warnings: list[str] = []
    recorded: list[dict] = []
    work = seq
    iterations = 0
    while True:
        floor = _uncertainty_floor(seq, system, recorded)
        if recorded:
            full = _subtract_terms(seq, system, [(r["key"], r["coeff"]) for r in recorded])
            if full is None:
                raise MaxTermsExceeded("residual overflow while peeling unresolved growth")
            trusted = _trusted_prefix(full, floor)
            if trusted is None:
                break  # residual indistinguishable from peel noise: bounded
            work = trusted
        work_floor = float(np.max(floor[: len(work)]))
        est, _, _ = _joint_slopes(work, system, config)
        if _is_bounded(est, config):
            break
        if len(recorded) >= config.max_terms:
            raise MaxTermsExceeded(
                f"residual still grows (order ~ {est[0]:.3g}) after {config.max_terms} terms"
            )
        iterations += 1
        below = recorded[-1]["key"] if recorded else None
        candidates, _, cand_warnings = _candidate_keys(
            work, system, config, below, [r["key"] for r in recorded]
        )
        warnings.extend(w for w in cand_warnings if w not in warnings)
        if not candidates:
            if _settles(work.values, work_floor):
                break  # order estimate was an artifact; the tail settles
            raise StalledExtraction(
                "no admissible leading exponent strictly below the previous one"
            )
        gammas = [
            abs(a.key.exponents[0] - b.key.exponents[0])
            for a in candidates
            for b in candidates
            if a is not b
        ]
        scored = []
        for cand in candidates:
            fit = _extract_against(
                work, system, cand.key, [r["key"] for r in recorded], config, gammas
            )
            scored.append((cand, fit))
        coeff_scale = max(
            [abs(r["coeff"]) for r in recorded] + [abs(f.coeff) for _, f in scored] + [0.0]
        )
        zero_floor = config.zero_tol * max(coeff_scale, 1e-300)

        quart = max(2, len(work) // 4)
        resid_scale = float(np.max(np.abs(work.values[-quart:])))

        def is_real_term(cand: _Candidate, f: _TailFit) -> bool:
            if not math.isfinite(f.rel_residual):
                return False
            if abs(f.coeff) <= max(_SIGNIFICANCE * f.stderr, zero_floor):
                return False
            # the term must explain a real share of the tail residual, yet
            # stay within sight of it
            end_rho = float(evaluate_scale(system, cand.key, float(work.lambdas[-1])))
            contribution = abs(f.coeff) * end_rho
            return 0.02 * resid_scale < contribution <= 4.0 * resid_scale + work_floor

        significant = [(c, f) for c, f in scored if is_real_term(c, f)]
        best = fit = None
        if significant:
            significant.sort(key=lambda cf: cf[1].rel_residual)
            best_rel = significant[0][1].rel_residual
            shortlist = [
                cf
                for cf in significant
                if cf[1].rel_residual <= max(10.0 * best_rel, best_rel + 1e-12)
            ]
            # Occam tie-break: among comparably good fits prefer the key made
            # of the simplest rationals, then the better fit
            shortlist.sort(
                key=lambda cf: (
                    not cf[0].snapped,
                    _key_complexity(cf[0].key, config),
                    cf[1].rel_residual,
                    cf[0].key.exponents,
                )
            )
            best, fit = shortlist[0]
        if best is None or fit.grow_ratio > _BLOWUP_RATIO:
            # the residual outgrows every admissible scale: either stop honestly
            # or burn down the key ladder one step at a time until the term
            # budget gives out
            blowups = [
                (c, f)
                for c, f in scored
                if f.grow_ratio > _BLOWUP_MEMBER and abs(f.coeff) > 0.0 and math.isfinite(abs(f.coeff))
            ]
            if not blowups:
                if best is not None:
                    pass  # significant, settled coefficient: keep it
                elif _settles(work.values, work_floor):
                    break  # nothing extractable and the tail settles: bounded
                else:
                    raise StalledExtraction(
                        "no significant coefficient at any admissible leading scale"
                    )
            else:
                blowups.sort(key=lambda cf: cf[0].key.exponents, reverse=True)
                best, fit = blowups[0]
                msg = "growth exceeds every admissible scale; peeling best-effort terms"
                if msg not in warnings:
                    warnings.append(msg)
        if recorded and not best.key < recorded[-1]["key"]:
            raise StalledExtraction("leading exponent failed to decrease")
        honest = _extract_against(
            work, system, best.key, [r["key"] for r in recorded], config, gammas, honest_stderr=True
        )
        if abs(honest.coeff) > 0.0 and math.isfinite(honest.rel_residual):
            fit = honest
        recorded.append(
            {"key": best.key, "coeff": fit.coeff, "stderr": fit.stderr, "snapped": best.snapped}
        )
        if fit.grow_ratio <= _BLOWUP_RATIO:
            _sweep(seq, system, recorded, config)

    # final polish: two more Gauss-Seidel passes so every coefficient settles
    # on the refreshed residuals of the others
    for _ in range(2 if recorded else 0):
        _sweep(seq, system, recorded, config)

    coeff_scale = max((abs(r["coeff"]) for r in recorded), default=1.0)
    kept = [r for r in recorded if abs(r["coeff"]) > config.zero_tol * coeff_scale]
    if len(kept) != len(recorded):
        dropped = [str(r["key"]) for r in recorded if r not in kept]
        warnings.append("dropped negligible refined terms: " + ", ".join(dropped))
        recorded = kept

    residual = _subtract_terms(seq, system, [(r["key"], r["coeff"]) for r in recorded])
    if residual is None:
        raise Nonconvergent("refined residual is not finite")
    floor = _uncertainty_floor(seq, system, recorded)
    gate = _trusted_prefix(residual, floor)
    if gate is None:
        gate = residual  # nothing but noise left; the gate passes on spreads
    sigma = floor[: len(gate)] + np.finfo(float).eps * np.abs(gate.values)
    noise_floor = float(np.max(floor[: len(gate)]))
    limit_config = replace(config, tail_fraction=1.0) if config.limit_model == "richardson" else config
    finite_part, finite_stderr = estimate_limit(
        gate, limit_config, noise_floor=noise_floor, row_sigma=sigma
    )

    resid_rel = float(
        np.sqrt(np.mean((np.abs(residual.values) / (np.abs(seq.values) + floor + 1e-300)) ** 2))
    )
    diagnostics = Diagnostics(
        residual_norm=resid_rel,
        iterations=iterations,
        grid_span=(float(seq.lambdas[0]), float(seq.lambdas[-1]), len(seq)),
        warnings=tuple(warnings),
    )
    return normalize(
        system,
        [Term(r["key"], r["coeff"], r["stderr"], r["snapped"]) for r in recorded],
        finite_part,
        zero_tol=config.zero_tol,
        finite_part_stderr=finite_stderr,
        diagnostics=diagnostics,
    )
