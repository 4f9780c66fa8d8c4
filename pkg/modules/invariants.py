#!/usr/bin/env python3
"""
Integrals of motion and asymptotic expansions.

The integrals J_k come from the Lax matrix by traces and, independently, from
the coefficients of Delta by Newton-type identities. The logarithmic
expansions of Delta and of the Floquet multiplier at infinity carry the same
integrals with opposite signs; the 1-form Q built from ln(rho) encodes the
Hamiltonians of the Volterra hierarchy for both brackets.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
from scipy.special import factorial

from config.constants import (
    DIFFERENTIAL_SAMPLE_RADIUS, MIN_DIFFERENTIAL_SAMPLES, MIN_FIT_SAMPLES, PRIMARY_FIT_RADIUS,
    SECONDARY_FIT_RADIUS
)
from config.settings import BracketKind, ToleranceConfig
from modules.errors import FitIllConditioned, NearBranchPoint, OutOfRange, SingularCurve
from modules.lattice import PeriodicOperator
from modules.spectral import (
    DeltaPolynomial, curve_y, delta_from_monodromy, floquet_rho, spectral_curve
)
from utils.schemas import CheckReport

logger = logging.getLogger(__name__)

LaxMatrix = np.ndarray


def lax_matrix(op: PeriodicOperator, twist: int = 1) -> LaxMatrix:
    """Symmetric cyclic zero-diagonal matrix with L[i-1, i] = a_i.

    Args:
        op: Operator
        twist: Sign of the two corner entries; -1 gives the antiperiodic
            matrix whose eigenvalues are the roots of Delta + 2

    Returns:
        Dense (2N+1)x(2N+1) array
    """
    if twist not in (-1, 1):
        raise OutOfRange(f"twist must be +1 or -1, got {twist}")
    period = op.period
    matrix = np.zeros((period, period))
    for i in range(1, period):
        matrix[i - 1, i] = matrix[i, i - 1] = op.a[i]
    matrix[period - 1, 0] = matrix[0, period - 1] = twist * op.a[0]
    return matrix


def j_trace(op: PeriodicOperator, k: int) -> float:
    """J_0 = sum ln a_i; J_k = tr L**(2k) / (2k) for 1 <= k <= N."""
    if k < 0 or k > op.genus:
        raise OutOfRange(f"k={k} outside 0..{op.genus}")
    if k == 0:
        return 0.5 * float(np.sum(np.log(op.c)))
    square = lax_matrix(op) @ lax_matrix(op)
    return float(np.trace(np.linalg.matrix_power(square, k))) / (2 * k)


@dataclass(frozen=True)
class InvariantSet:
    """J_0..J_N of one operator."""
    J: np.ndarray

    @property
    def genus(self) -> int:
        return int(self.J.size) - 1


def invariant_set(op: PeriodicOperator) -> InvariantSet:
    return InvariantSet(J=np.array([j_trace(op, k) for k in range(op.genus + 1)]))


def _compositions(k: int, n: int) -> Iterator[Tuple[int, ...]]:
    """All (j_1..j_n) >= 0 with j_1 + 2 j_2 + ... + n j_n = k."""
    def build(part: int, remaining: int) -> Iterator[List[int]]:
        if part > n:
            if remaining == 0:
                yield []
            return
        for count in range(remaining // part + 1):
            for tail in build(part + 1, remaining - count * part):
                yield [count] + tail

    for composition in build(1, k):
        yield tuple(composition)


def _composition_weight(counts: Tuple[int, ...]) -> Fraction:
    """(-1)**(j_2 + j_4 + ...) (j_1+...+j_N-1)! / (j_1!...j_N!) as an exact rational."""
    sign = -1 if sum(counts[1::2]) % 2 else 1
    weight = Fraction(int(factorial(sum(counts) - 1, exact=True)))
    for count in counts:
        weight /= int(factorial(count, exact=True))
    return sign * weight


def j_from_i(delta: DeltaPolynomial, k: int) -> float:
    """J_k from the ratios I_m / I_0 through the multinomial form of Newton's identities.

    Sums (-1)**(j_2 + j_4 + ...) (j_1+...+j_N-1)!/(j_1!...j_N!) prod (I_m/I_0)**j_m
    over the compositions of k. The terms alternate and cancel heavily for
    large N, so the sum is carried out exactly on the rational values of the
    float ratios and rounded once.
    """
    n = delta.genus
    if k < 1 or k > n:
        raise OutOfRange(f"k={k} outside 1..{n}")
    ratios = [Fraction(float(r)) for r in delta.I[1:] / delta.I[0]]
    total = Fraction(0)
    for counts in _compositions(k, n):
        total += _composition_weight(counts) * math.prod(r ** c for r, c in zip(ratios, counts) if c)
    return float(total)


# === Expansions at infinity ===

@dataclass(frozen=True)
class SeriesExpansion:
    """log_coefficient * ln(lambda) + sum_k coefficients[k] * lambda**(offset - 2k).

    consistency is the largest relative disagreement between two independent
    extractions (0 for series obtained algebraically).
    """
    coefficients: np.ndarray
    log_coefficient: float
    offset: int = 0
    condition: float = 1.0
    consistency: float = 0.0

    @property
    def order(self) -> int:
        return int(self.coefficients.size) - 1

    def evaluate(self, lam: complex) -> complex:
        powers = lam ** (self.offset - 2 * np.arange(self.coefficients.size))
        return self.log_coefficient * np.log(lam) + complex(np.sum(self.coefficients * powers))


def _check_order(order: Optional[int], n: int) -> int:
    if order is None:
        return n
    if order < 0 or order > n + 1:
        raise OutOfRange(f"expansion order {order} outside 0..{n + 1}")
    return order


def expand_log_delta(delta: DeltaPolynomial, order: Optional[int] = None) -> SeriesExpansion:
    """ln Delta = (2N+1) ln(lambda) + ln I_0 + ln(1 + sum_i (-1)**i (I_i/I_0) u**i), u = lambda**-2.

    The last logarithm is expanded by the power-series recurrence
    n L_n = n f_n - sum_{k<n} k L_k f_{n-k}.
    """
    order = _check_order(order, delta.genus)
    f = np.zeros(order + 1)
    for i in range(1, min(order, delta.genus) + 1):
        f[i] = (-1) ** i * delta.I[i] / delta.I[0]

    logs = np.zeros(order + 1)
    logs[0] = np.log(delta.I[0])
    for m in range(1, order + 1):
        acc = m * f[m]
        for k in range(1, m):
            acc -= k * logs[k] * f[m - k]
        logs[m] = acc / m
    return SeriesExpansion(coefficients=logs, log_coefficient=float(delta.degree))


def _sample_circle(radius: float, count: int) -> np.ndarray:
    """Upper half-plane nodes radius * exp(i pi (s + 1/2) / count)."""
    angles = np.pi * (np.arange(count) + 0.5) / count
    return radius * np.exp(1j * angles)


def _fit_in_u(values: np.ndarray, lam: np.ndarray, order: int,
              tol: ToleranceConfig) -> Tuple[np.ndarray, float]:
    """Least-squares coefficients of a power series in u = lambda**-2.

    Columns are scaled by |u|**k, which makes the design matrix unitary up to a
    constant on the circle nodes.
    """
    u = lam ** -2.0
    scale = float(np.abs(u[0]))
    design = (u[:, None] / scale) ** np.arange(order + 1)[None, :]
    condition = float(np.linalg.cond(design))
    if condition > tol.fit_cond_max:
        raise FitIllConditioned(f"fit condition {condition:.3e} above {tol.fit_cond_max:.1e}")
    solution, *_ = np.linalg.lstsq(design, values, rcond=None)
    return solution / scale ** np.arange(order + 1), condition


def _continuous_log(values: np.ndarray) -> np.ndarray:
    """Unwrap the imaginary part along the nodes and centre it on the branch with mean near 0."""
    phase = np.unwrap(values.imag)
    phase -= 2.0 * np.pi * np.round(np.mean(phase) / (2.0 * np.pi))
    return values.real + 1j * phase


def _log_w(delta: DeltaPolynomial, lam: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    """ln(rho_minus * lambda**(2N+1)), analytic in u near u = 0."""
    rho = floquet_rho(delta, lam, -1, tol, strict=True)
    return _continuous_log(np.log(rho * lam ** delta.degree))


def _fit_radii(delta: DeltaPolynomial, tol: ToleranceConfig) -> Tuple[float, float]:
    curve = spectral_curve(delta, tol)
    base = max(curve.max_branch_modulus, 1.0)
    return PRIMARY_FIT_RADIUS * base, SECONDARY_FIT_RADIUS * base


def _two_circle_fit(func: Callable[[np.ndarray], np.ndarray], delta: DeltaPolynomial,
                    order: int, tol: ToleranceConfig) -> Tuple[np.ndarray, float, float]:
    count = max(MIN_FIT_SAMPLES, 4 * (order + 1))
    primary_radius, secondary_radius = _fit_radii(delta, tol)
    primary_nodes = _sample_circle(primary_radius, count)
    secondary_nodes = _sample_circle(secondary_radius, count)
    primary, condition = _fit_in_u(func(primary_nodes), primary_nodes, order, tol)
    secondary, _ = _fit_in_u(func(secondary_nodes), secondary_nodes, order, tol)
    floor = max(float(np.max(np.abs(primary))), 1e-300)
    consistency = float(np.max(np.abs(primary - secondary) / np.maximum(np.abs(primary), 1e-12 * floor)))
    logger.debug("two-circle fit: radii %.3f/%.3f, consistency %.3e", primary_radius,
                 secondary_radius, consistency)
    return primary, condition, consistency


def expand_log_rho(op: PeriodicOperator, delta: DeltaPolynomial, order: Optional[int] = None,
                   tol: Optional[ToleranceConfig] = None) -> SeriesExpansion:
    """Fitted expansion ln rho = -(2N+1) ln(lambda) + sum_k beta_k lambda**(-2k) on P_-.

    Args:
        op: Operator the discriminant belongs to
        delta: Its discriminant
        order: Highest power of lambda**-2 kept (default N)
        tol: Tolerances; fit_cond_max bounds the design condition

    Returns:
        SeriesExpansion whose coefficients approximate J_0..J_order
    """
    tol = tol or ToleranceConfig()
    order = _check_order(order, delta.genus)
    coeffs, condition, consistency = _two_circle_fit(lambda lam: _log_w(delta, lam, tol), delta, order, tol)
    if consistency > tol.fit_tol:
        logger.warning("ln(rho) fit for T=%s disagrees across circles by %.3e", op.period, consistency)
    return SeriesExpansion(coefficients=coeffs.real.copy(), log_coefficient=-float(delta.degree),
                           condition=condition, consistency=consistency)


def lemma_limit_sequence(delta: DeltaPolynomial, count: int = 6,
                         tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """|lambda**(2N+1) (ln rho + ln Delta)| on P_- at lambda = 2 R_b * 2**j.

    ln rho_- + ln Delta = ln(1 + rho_-**2) exactly, which keeps the
    cancellation out of floating point. rho_- is real beyond the branch
    points; complex log1p rounds arguments below about 1e-16 to zero.
    """
    tol = tol or ToleranceConfig()
    start, _ = _fit_radii(delta, tol)
    lam = start * 2.0 ** np.arange(count)
    rho = np.real(floquet_rho(delta, lam, -1, tol, strict=True))
    return np.abs(lam ** delta.degree * np.log1p(rho ** 2))


def limit_decay_ratios(limits: np.ndarray) -> np.ndarray:
    """Ratios of consecutive limit terms; 0/0 counts as decayed, x/0 with x > 0 as growth."""
    limits = np.asarray(limits, dtype=float)
    previous, current = limits[:-1], limits[1:]
    ratios = np.divide(current, previous, out=np.zeros_like(current), where=previous > 0)
    return np.where((previous <= 0) & (current > 0), np.inf, ratios)


# === The 1-form Q ===

def q_form(delta: DeltaPolynomial, lam: complex, bracket: BracketKind,
           tol: Optional[ToleranceConfig] = None) -> complex:
    """Q = 2 ln rho / lambda**m on P_-, m = 1 (quadratic) or 3 (cubic)."""
    rho = floquet_rho(delta, lam, -1, tol, strict=True)
    return 2.0 * np.log(rho) / np.asarray(lam) ** bracket.momentum_exponent


def theorem_a_check(op: PeriodicOperator, bracket: BracketKind,
                    tol: Optional[ToleranceConfig] = None,
                    delta: Optional[DeltaPolynomial] = None) -> CheckReport:
    """Coefficients of lambda**(-2k-1) in Q against the Hamiltonians of the flows.

    The (2N+1) ln(lambda) / lambda**m term is removed before fitting. For the
    quadratic bracket the lambda**-1 coefficient 2 J_0 depends only on the
    annulator and is reported, not compared.
    """
    tol = tol or ToleranceConfig()
    delta = delta or delta_from_monodromy(op, tol)
    exponent = bracket.momentum_exponent
    n = delta.genus

    def scaled_q(lam: np.ndarray) -> np.ndarray:
        raw = lam ** exponent * q_form(delta, lam, bracket, tol) + 2.0 * delta.degree * np.log(lam)
        return _continuous_log(raw)

    fitted, _, consistency = _two_circle_fit(scaled_q, delta, n, tol)
    # fitted[k] multiplies lambda**(-2k - m); re-index by k in lambda**(-2k-1)
    shift = (exponent - 1) // 2
    errors = []
    for k in range(1, n + 1):
        target = 2.0 * j_trace(op, k - shift)
        errors.append(abs(fitted[k - shift].real - target) / max(abs(target), 1.0))
    worst = float(max(errors))
    detail = f"consistency={consistency:.3e}"
    if bracket is BracketKind.QUADRATIC:
        detail += f" annulator_coefficient={fitted[0].real!r}"
    logger.info("theorem a (%s): max relative error %.3e", bracket.value, worst)
    return CheckReport(name=f"theorem_a_{bracket.value}", max_residual=worst,
                       tolerance=tol.fit_tol, passed=worst < tol.fit_tol, detail=detail)


def differential_samples(delta: DeltaPolynomial, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """Nodes 1.5 R_b exp(i pi (s + 1/2) / n), n = max(8, 2N), off the real axis."""
    tol = tol or ToleranceConfig()
    curve = spectral_curve(delta, tol)
    count = max(MIN_DIFFERENTIAL_SAMPLES, 2 * delta.genus)
    return _sample_circle(DIFFERENTIAL_SAMPLE_RADIUS * max(curve.max_branch_modulus, 1.0), count)


def _q_partial(delta: DeltaPolynomial, lam: complex, k: int, bracket: BracketKind,
               tol: ToleranceConfig) -> complex:
    """dQ/dI_k by central differences with one Richardson step.

    Differentiates rho rather than ln(rho) so the logarithm's branch cut never
    enters; dQ = 2 d(rho) / (rho lambda**m). The step moves Delta(lambda) by
    the relative amount fd_step.
    """
    base = delta.I[k]
    step = tol.fd_step * max(abs(delta.evaluate(lam)), 1.0) / abs(delta.partial(k, lam))

    def central(h: float) -> complex:
        up = floquet_rho(delta.with_coefficient(k, base + h), lam, -1, tol, strict=True)
        down = floquet_rho(delta.with_coefficient(k, base - h), lam, -1, tol, strict=True)
        return (up - down) / (2.0 * h)

    derivative = (4.0 * central(step / 2.0) - central(step)) / 3.0
    rho = floquet_rho(delta, lam, -1, tol, strict=True)
    return 2.0 * derivative / (rho * lam ** bracket.momentum_exponent)


def differential_target(delta: DeltaPolynomial, lam: complex, k: int, bracket: BracketKind,
                        tol: Optional[ToleranceConfig] = None) -> complex:
    """(-1)**k lambda**(2N+1-2k-m) / y with y on P_-."""
    y = curve_y(delta, lam, -1, tol, strict=True)
    return (-1) ** k * lam ** (delta.degree - 2 * k - bracket.momentum_exponent) / y


def theorem_b_check(delta: DeltaPolynomial, bracket: BracketKind, k: Optional[int] = None,
                    lam_samples: Optional[np.ndarray] = None,
                    tol: Optional[ToleranceConfig] = None) -> CheckReport:
    """dQ/dI_k at fixed annulator against the holomorphic differentials on the curve.

    Args:
        delta: Discriminant of a nonsingular curve
        bracket: QUADRATIC varies I_1..I_N (I_0 fixed), CUBIC varies I_0..I_{N-1} (I_N fixed)
        k: Restrict to one index; default all of them
        lam_samples: Evaluation points; default differential_samples(delta)
        tol: Tolerances

    Returns:
        CheckReport; passes when every relative deviation is below 1e-6 and the
        sample matrix of the N differentials has condition below fit_cond_max
    """
    tol = tol or ToleranceConfig()
    curve = spectral_curve(delta, tol)
    if not curve.nonsingular:
        raise SingularCurve(f"multiple branch point (min separation {curve.min_separation:.3e})")

    n = delta.genus
    indices = list(range(1, n + 1)) if bracket is BracketKind.QUADRATIC else list(range(0, n))
    if k is not None:
        if k not in indices:
            raise OutOfRange(f"index {k} not varied for the {bracket.value} bracket")
        indices = [k]

    samples = differential_samples(delta, tol) if lam_samples is None else np.asarray(lam_samples, dtype=complex)
    for lam in samples:
        if abs(lam) < tol.sep_tol or curve.distance_to_branch(lam) < np.sqrt(tol.sep_tol):
            raise NearBranchPoint(f"sample {lam} too close to a branch point or 0")

    computed = np.array([[_q_partial(delta, lam, j, bracket, tol) for j in indices] for lam in samples])
    targets = np.array([[differential_target(delta, lam, j, bracket, tol) for j in indices] for lam in samples])
    deviation = float(np.max(np.abs(computed - targets) / np.abs(targets)))

    # sigma-invariance needs an even power of lambda over y
    odd = [j for j in indices if (delta.degree - 2 * j - bracket.momentum_exponent) % 2]

    normalized = computed / np.linalg.norm(computed, axis=0, keepdims=True)
    condition = float(np.linalg.cond(normalized)) if len(indices) == n else 1.0
    passed = deviation < tol.theorem_tol and not odd and condition < tol.fit_cond_max
    logger.info("theorem b (%s): deviation %.3e, sample condition %.3e", bracket.value, deviation, condition)
    return CheckReport(name=f"theorem_b_{bracket.value}", max_residual=deviation, tolerance=tol.theorem_tol,
                       passed=passed, detail=f"samples={samples.size} condition={condition:.3e}")
