#!/usr/bin/env python3
"""
Spectral data of periodic operators: transfer and monodromy matrices, the
discriminant Delta(lambda) by two independent routes, the spectral curve
y**2 = Delta**2/4 - 1, the Dirichlet spectrum, Floquet multipliers and Bloch
functions.

Conventions: the state vector is v_n = (psi_n, psi_{n-1}); one step is
v_{n+1} = A_n v_n, and the monodromy based at site s is
M_s = A_{s+T-1} ... A_{s+1} A_s, so det M_s = a_s / a_{s+T} = 1.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import eigh_tridiagonal

from config.settings import ToleranceConfig
from modules.errors import (
    BranchAmbiguity, DegenerateSpectrum, OutOfRange, ParityViolation, PoleHit,
    RootFindingFailure, SingularCurve
)
from modules.lattice import PeriodicOperator
from utils.helpers import min_pairwise_distance

logger = logging.getLogger(__name__)

# Coefficients in ascending powers of lambda
Poly = Polynomial

ArrayLike = Union[float, complex, np.ndarray]


# === Transfer and monodromy matrices ===

def transfer_step(op: PeriodicOperator, n: int) -> List[List[Poly]]:
    """One-step transfer matrix A_n(lambda): (psi_n, psi_{n-1}) -> (psi_{n+1}, psi_n)."""
    a_n = op.amplitude(n)
    a_next = op.amplitude(n + 1)
    return [
        [Poly([0.0, 1.0 / a_next]), Poly([-a_n / a_next])],
        [Poly([1.0]), Poly([0.0])],
    ]


def _poly_matmul(left: List[List[Poly]], right: List[List[Poly]]) -> List[List[Poly]]:
    return [
        [left[r][0] * right[0][col] + left[r][1] * right[1][col] for col in range(2)]
        for r in range(2)
    ]


@dataclass(frozen=True)
class MonodromyMatrix:
    """2x2 matrix with polynomial entries."""
    m11: Poly
    m12: Poly
    m21: Poly
    m22: Poly

    def trace(self) -> Poly:
        return self.m11 + self.m22

    def det(self) -> Poly:
        return self.m11 * self.m22 - self.m12 * self.m21

    def evaluate(self, lam: complex) -> np.ndarray:
        return np.array([[self.m11(lam), self.m12(lam)],
                         [self.m21(lam), self.m22(lam)]])


def monodromy(op: PeriodicOperator, start: int = 0) -> MonodromyMatrix:
    """Monodromy over one full period by exact polynomial multiplication.

    Args:
        op: Operator
        start: Base site s; s=1 gives the boundary-adapted matrix taking
            (psi_1, psi_0) to (psi_{T+1}, psi_T)

    Returns:
        MonodromyMatrix with det identically 1 and trace Delta(lambda)
    """
    product = [[Poly([1.0]), Poly([0.0])], [Poly([0.0]), Poly([1.0])]]
    for n in range(start, start + op.period):
        product = _poly_matmul(transfer_step(op, n), product)
    return MonodromyMatrix(product[0][0], product[0][1], product[1][0], product[1][1])


def monodromy_at(op: PeriodicOperator, lam: complex, start: int = 0) -> np.ndarray:
    """Numeric monodromy at a single lambda, multiplying 2x2 matrices directly."""
    dtype = complex if np.iscomplexobj(lam) else float
    product = np.eye(2, dtype=dtype)
    for n in range(start, start + op.period):
        a_n = op.amplitude(n)
        a_next = op.amplitude(n + 1)
        step = np.array([[lam / a_next, -a_n / a_next], [1.0, 0.0]], dtype=dtype)
        product = step @ product
    return product


def monodromy_derivatives(op: PeriodicOperator, lam: float,
                          start: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Numeric monodromy with its derivatives in c (lambda fixed) and in lambda.

    Each factor A_n holds a_n and a_{n+1}; differentiating the product factor
    by factor gives dM = sum_n (A_last...A_{n+1}) dA_n (A_{n-1}...A_start).

    Returns:
        (M, dM/dc with shape (T, 2, 2), dM/dlambda)
    """
    period = op.period
    steps = []
    for n in range(start, start + period):
        a_n, a_next = op.amplitude(n), op.amplitude(n + 1)
        steps.append(np.array([[lam / a_next, -a_n / a_next], [1.0, 0.0]]))

    prefix = [np.eye(2)]
    for step in steps:
        prefix.append(step @ prefix[-1])
    suffix = [np.eye(2)] * (period + 1)
    for j in range(period - 1, -1, -1):
        suffix[j] = suffix[j + 1] @ steps[j]

    d_amplitude = np.zeros((period, 2, 2))
    d_lam = np.zeros((2, 2))
    for j, n in enumerate(range(start, start + period)):
        left, right = suffix[j + 1], prefix[j]
        a_n, a_next = op.amplitude(n), op.amplitude(n + 1)
        d_lam += left @ np.array([[1.0 / a_next, 0.0], [0.0, 0.0]]) @ right
        d_amplitude[n % period] += left @ np.array([[0.0, -1.0 / a_next], [0.0, 0.0]]) @ right
        d_amplitude[(n + 1) % period] += left @ np.array(
            [[-lam / a_next ** 2, a_n / a_next ** 2], [0.0, 0.0]]) @ right
    d_c = d_amplitude / (2.0 * op.a)[:, None, None]
    return prefix[-1], d_c, d_lam


# === The discriminant ===

@dataclass(frozen=True, eq=False)
class DeltaPolynomial:
    """Delta(lambda) = sum_i (-1)**i I_i lambda**(2N+1-2i)."""
    I: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.I, dtype=float)
        coeffs.setflags(write=False)
        object.__setattr__(self, "I", coeffs)

    @property
    def genus(self) -> int:
        return int(self.I.size) - 1

    @property
    def degree(self) -> int:
        return 2 * self.genus + 1

    @property
    def poly(self) -> Poly:
        coef = np.zeros(self.degree + 1)
        for i, value in enumerate(self.I):
            coef[self.degree - 2 * i] = (-1) ** i * value
        return Poly(coef)

    def evaluate(self, lam: ArrayLike) -> ArrayLike:
        return self.poly(lam)

    def derivative(self, lam: ArrayLike) -> ArrayLike:
        return self.poly.deriv()(lam)

    def partial(self, k: int, lam: ArrayLike) -> ArrayLike:
        """dDelta/dI_k at lambda."""
        return (-1) ** k * np.asarray(lam) ** (self.degree - 2 * k)

    def with_coefficient(self, k: int, value: float) -> "DeltaPolynomial":
        """Copy with I_k replaced; used for differentiation in coefficient space."""
        coeffs = self.I.copy()
        coeffs[k] = value
        return DeltaPolynomial(coeffs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeltaPolynomial):
            return NotImplemented
        return np.array_equal(self.I, other.I)

    __hash__ = None


def delta_from_monodromy(op: PeriodicOperator,
                         tol: Optional[ToleranceConfig] = None) -> DeltaPolynomial:
    """Read I_0..I_N off the trace of the monodromy matrix.

    Raises:
        ParityViolation: an even power of lambda carries a coefficient above eq_tol
    """
    tol = tol or ToleranceConfig()
    trace = monodromy(op).trace()
    degree = op.period
    coef = np.zeros(degree + 1)
    coef[:trace.coef.size] = trace.coef[:degree + 1]
    scale = max(1.0, float(np.max(np.abs(coef))))
    even = coef[0::2]
    if np.max(np.abs(even)) > tol.eq_tol * scale:
        raise ParityViolation(
            f"even-power coefficient {np.max(np.abs(even)):.3e} in trace of monodromy"
        )
    invariants = np.array([(-1) ** i * coef[degree - 2 * i] for i in range(op.genus + 1)])
    return DeltaPolynomial(invariants)


@lru_cache(maxsize=None)
def _disconnected_subsets(period: int, size: int) -> Tuple[Tuple[int, ...], ...]:
    subsets: List[Tuple[int, ...]] = []

    def extend(prefix: List[int], first_free: int):
        if len(prefix) == size:
            subsets.append(tuple(prefix))
            return
        for j in range(first_free, period):
            # 0 and T-1 are cyclically adjacent
            if prefix and prefix[0] == 0 and j == period - 1:
                continue
            prefix.append(j)
            extend(prefix, j + 2)
            prefix.pop()

    extend([], 0)
    return tuple(subsets)


def enumerate_totally_disconnected(period: int, size: int) -> List[Tuple[int, ...]]:
    """All size-i subsets of Z_T without cyclically adjacent elements, lexicographic.

    Raises:
        OutOfRange: size outside 0..N
    """
    n = (period - 1) // 2
    if size < 0 or size > n:
        raise OutOfRange(f"subset size {size} outside 0..{n}")
    return list(_disconnected_subsets(period, size))


def subset_array(period: int, size: int) -> np.ndarray:
    """Enumerated subsets as an integer array of shape (count, size)."""
    subsets = enumerate_totally_disconnected(period, size)
    return np.array(subsets, dtype=int).reshape(len(subsets), size)


def delta_combinatorial(op: PeriodicOperator) -> DeltaPolynomial:
    """I_i = I_0 * sum over totally disconnected subsets of prod c_j, I_0 = 1/prod a."""
    i0 = 1.0 / float(np.prod(op.a))
    invariants = [i0]
    for size in range(1, op.genus + 1):
        subsets = subset_array(op.period, size)
        invariants.append(i0 * float(np.sum(np.prod(op.c[subsets], axis=1))))
    return DeltaPolynomial(np.array(invariants))


def i_n_closed_form(op: PeriodicOperator) -> float:
    """I_N = I_0 sum_k c_k c_{k+2} ... c_{k+2N-2}, indices mod 2N+1."""
    n, period = op.genus, op.period
    i0 = 1.0 / float(np.prod(op.a))
    total = 0.0
    for k in range(period):
        total += float(np.prod([op.weight(k + 2 * m) for m in range(n)]))
    return i0 * total


# === The spectral curve ===

@dataclass(frozen=True)
class SpectralCurve:
    """Branch points of y**2 = Delta**2/4 - 1, split into the Delta = +2 and -2 families."""
    branch_points_plus: np.ndarray
    branch_points_minus: np.ndarray
    nonsingular: bool
    genus: int
    min_separation: float

    @property
    def branch_points(self) -> np.ndarray:
        return np.concatenate([self.branch_points_plus, self.branch_points_minus])

    @property
    def max_branch_modulus(self) -> float:
        return float(np.max(np.abs(self.branch_points)))

    def distance_to_branch(self, lam: complex) -> float:
        return float(np.min(np.abs(self.branch_points - lam)))


def _polished_roots(poly: Poly, tol: ToleranceConfig) -> np.ndarray:
    """Companion-matrix roots with computed double roots snapped together.

    A double root of P comes out of the eigenvalue solver split by about
    sqrt(eps); it is a simple root of P' and is recovered there accurately.
    """
    try:
        roots = poly.roots().astype(complex)
        critical = poly.deriv().roots().astype(complex)
    except np.linalg.LinAlgError as e:
        raise RootFindingFailure(f"eigenvalue solver failed: {e}") from e

    scale = float(np.sum(np.abs(poly.coef)))
    for d in critical:
        if abs(poly(d)) > tol.eq_tol * scale * max(1.0, abs(d)) ** poly.degree():
            continue
        nearest = np.argsort(np.abs(roots - d))[:2]
        if np.max(np.abs(roots[nearest] - d)) < np.sqrt(tol.sep_tol) * max(1.0, abs(d)):
            logger.warning("snapping multiple root of Delta-+2 at %s", d)
            roots[nearest] = d
    return roots


def _sorted_roots(roots: np.ndarray) -> np.ndarray:
    return roots[np.lexsort((roots.imag, roots.real))]


def spectral_curve(delta: DeltaPolynomial, tol: Optional[ToleranceConfig] = None) -> SpectralCurve:
    """Branch points of Gamma and its nonsingularity flag."""
    tol = tol or ToleranceConfig()
    poly = delta.poly
    plus = _sorted_roots(_polished_roots(poly - 2.0, tol))
    minus = _sorted_roots(_polished_roots(poly + 2.0, tol))
    separation = min_pairwise_distance(np.concatenate([plus, minus]))
    curve = SpectralCurve(
        branch_points_plus=plus,
        branch_points_minus=minus,
        nonsingular=separation > tol.sep_tol,
        genus=delta.genus,
        min_separation=separation,
    )
    logger.info("spectral curve: %d branch points, min separation %.3e, nonsingular=%s",
                plus.size + minus.size, separation, curve.nonsingular)
    return curve


# === Dirichlet spectrum and divisor ===

@dataclass(frozen=True)
class DivisorData:
    """Positive Dirichlet eigenvalues and, once resolved, their Floquet multipliers."""
    lam: np.ndarray
    rho: Optional[np.ndarray] = None
    sheet: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None

    @property
    def genus(self) -> int:
        return int(self.lam.size)

    @property
    def full_spectrum(self) -> np.ndarray:
        return np.concatenate([-self.lam[::-1], self.lam])

    @property
    def resolved(self) -> bool:
        return self.rho is not None


def dirichlet_eigensystem(op: PeriodicOperator) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unit eigenvectors of the Dirichlet matrix B.

    B acts on (psi_1, ..., psi_{T-1}) with zero diagonal and off-diagonal
    entries a_2, ..., a_{T-1}; a_i couples rows i-2 and i-1.
    """
    diagonal = np.zeros(op.period - 1)
    off_diagonal = op.a[2:op.period]
    return eigh_tridiagonal(diagonal, off_diagonal)


def dirichlet_spectrum(op: PeriodicOperator, tol: Optional[ToleranceConfig] = None) -> DivisorData:
    """The N positive eigenvalues of the problem psi_0 = psi_T = 0."""
    tol = tol or ToleranceConfig()
    values, _ = dirichlet_eigensystem(op)
    scale = max(1.0, float(np.max(np.abs(values))))
    asymmetry = float(np.max(np.abs(values + values[::-1])))
    if asymmetry > tol.eq_tol * scale:
        raise ParityViolation(f"Dirichlet spectrum not symmetric (defect {asymmetry:.3e})")
    gaps = np.diff(values)
    if gaps.size and float(np.min(gaps)) < tol.sep_tol:
        raise DegenerateSpectrum(f"Dirichlet eigenvalues coincide within {np.min(gaps):.3e}")
    return DivisorData(lam=values[op.genus:].copy())


def dirichlet_from_monodromy(op: PeriodicOperator) -> np.ndarray:
    """Independent oracle: sorted real roots of the lower-left entry of M_1.

    That entry is psi_T for psi_0 = 0, psi_1 = 1, and vanishes exactly on the
    Dirichlet spectrum.
    """
    try:
        roots = monodromy(op, start=1).m21.roots()
    except np.linalg.LinAlgError as e:
        raise RootFindingFailure(f"eigenvalue solver failed: {e}") from e
    return np.sort(np.real(roots))


# === Floquet multipliers ===

def floquet_pair(delta: DeltaPolynomial, lam: ArrayLike,
                 tol: Optional[ToleranceConfig] = None,
                 strict: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Both Floquet multipliers (rho_minus, rho_plus) with rho_minus * rho_plus = 1.

    rho_minus lies on P_-: it is the root of rho**2 - Delta rho + 1 of smaller
    modulus, continued from large positive lambda through the plane cut along
    the spectral bands; on a band it is the limit from the upper half-plane.

    Raises:
        BranchAmbiguity: strict and lambda within sep_tol of a branch point
    """
    tol = tol or ToleranceConfig()
    lam = np.asarray(lam, dtype=complex)
    value = np.asarray(delta.evaluate(lam), dtype=complex)
    disc = value * value / 4.0 - 1.0

    near_branch = np.abs(disc) <= tol.sep_tol
    if strict and np.any(near_branch):
        raise BranchAmbiguity(f"lambda within sep_tol of a branch point (|Delta^2/4-1|={np.min(np.abs(disc)):.3e})")

    root = np.sqrt(disc)
    first = value / 2.0 + root
    second = value / 2.0 - root
    big = np.where(np.abs(first) >= np.abs(second), first, second)
    small = 1.0 / big

    on_band = (lam.imag == 0) & (np.abs(value.imag) == 0) & (np.abs(value.real) < 2.0)
    if np.any(on_band):
        slope = np.sign(np.real(delta.derivative(lam.real)))
        slope = np.where(slope == 0, 1.0, slope)
        band_small = value.real / 2.0 - 1j * slope * np.sqrt(np.maximum(1.0 - value.real ** 2 / 4.0, 0.0))
        small = np.where(on_band, band_small, small)
        big = np.where(on_band, np.conj(band_small), big)

    small = np.where(near_branch, value / 2.0, small)
    big = np.where(near_branch, value / 2.0, big)
    return small, big


def floquet_rho(delta: DeltaPolynomial, lam: ArrayLike, sheet: int,
                tol: Optional[ToleranceConfig] = None, strict: bool = True) -> ArrayLike:
    """rho = Delta/2 + sheet * sqrt(Delta**2/4 - 1); sheet -1 is P_- (rho -> 0 as lambda -> +inf)."""
    if sheet not in (-1, 1):
        raise OutOfRange(f"sheet must be +1 or -1, got {sheet}")
    small, big = floquet_pair(delta, lam, tol, strict)
    result = small if sheet == -1 else big
    return result if result.ndim else complex(result)


def curve_y(delta: DeltaPolynomial, lam: ArrayLike, sheet: int,
            tol: Optional[ToleranceConfig] = None, strict: bool = True) -> ArrayLike:
    """y = rho - Delta/2 on the given sheet, so y**2 = Delta**2/4 - 1."""
    rho = floquet_rho(delta, lam, sheet, tol, strict)
    return rho - np.asarray(delta.evaluate(np.asarray(lam, dtype=complex))) / 2.0


def resolve_divisor_sheets(op: PeriodicOperator, delta: DeltaPolynomial, dirichlet: DivisorData,
                           tol: Optional[ToleranceConfig] = None) -> DivisorData:
    """Attach to each lambda_k the multiplier of the sheet carrying the Bloch pole.

    At a Dirichlet eigenvalue the boundary-adapted monodromy M_1 is upper
    triangular; its entry m11 is the eigenvalue for the Dirichlet direction
    (psi_1, psi_0) = (1, 0) and is taken as rho_k directly. The sheet is the
    root of rho**2 - tr(M_1) rho + 1 that m11 matches; exactly one of the two
    must match within sheet_tol.
    """
    tol = tol or ToleranceConfig()
    rhos, sheets, residuals = [], [], []
    for lam in dirichlet.lam:
        matrix = monodromy_at(op, float(lam), start=1)
        rho = float(matrix[0, 0])
        trace = float(matrix[0, 0] + matrix[1, 1])
        logger.debug("lambda=%s: trace %.17g, Delta %.17g", lam, trace, float(np.real(delta.evaluate(lam))))
        root = np.sqrt(max(trace * trace / 4.0 - 1.0, 0.0))
        big = trace / 2.0 + np.copysign(root, trace)
        candidates = {-1: 1.0 / big, 1: big}
        scores = {sheet: abs(rho - value) / max(1.0, abs(value)) for sheet, value in candidates.items()}
        best = min(scores, key=scores.get)
        if scores[best] > tol.sheet_tol or scores[-best] <= tol.sheet_tol:
            raise BranchAmbiguity(
                f"cannot resolve sheet at lambda={lam}: residuals {scores[-1]:.3e}, {scores[1]:.3e}"
            )
        rhos.append(rho)
        sheets.append(best)
        residuals.append(scores[best])
    logger.info("resolved divisor sheets %s", sheets)
    return DivisorData(
        lam=dirichlet.lam.copy(),
        rho=np.array(rhos, dtype=complex),
        sheet=np.array(sheets, dtype=int),
        residual=np.array(residuals),
    )


@dataclass(frozen=True)
class FlippedPoint:
    """A divisor point moved to its sigma-image, with the momentum shift it causes."""
    lam: float
    rho: complex
    momentum_before: complex
    momentum_after: complex
    shift: complex


def flip_divisor_point(divisor: DivisorData, k: int, exponent: int) -> FlippedPoint:
    """Replace (lambda_k, rho_k) by (-lambda_k, -rho_k).

    With principal logarithms p = 2 log(rho) / lambda**m changes to
    -p + C / lambda**m, and C = lambda**m (p + p') is a multiple of 2*pi*i.
    """
    if not divisor.resolved:
        raise OutOfRange("divisor sheets are not resolved")
    if k < 0 or k >= divisor.genus:
        raise OutOfRange(f"divisor index {k} outside 0..{divisor.genus - 1}")
    lam = float(divisor.lam[k])
    rho = complex(divisor.rho[k])
    before = 2.0 * np.log(rho) / lam ** exponent
    after = 2.0 * np.log(-rho) / (-lam) ** exponent
    shift = lam ** exponent * (before + after)
    return FlippedPoint(lam=-lam, rho=-rho, momentum_before=complex(before),
                        momentum_after=complex(after), shift=complex(shift))


# === Bloch functions ===

def bloch_function(op: PeriodicOperator, delta: DeltaPolynomial, lam: complex, sheet: int,
                   n_max: int, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """psi_0..psi_{n_max} with psi_0 = 1 and psi_{n+T} = rho psi_n.

    Raises:
        PoleHit: lambda is (near) a Dirichlet eigenvalue, where psi_1 diverges
        BranchAmbiguity: lambda within sep_tol of a branch point
    """
    tol = tol or ToleranceConfig()
    rho = complex(floquet_rho(delta, lam, sheet, tol, strict=True))
    matrix = monodromy_at(op, complex(lam), start=1)
    lower_left = matrix[1, 0]
    if abs(lower_left) <= tol.sep_tol * max(1.0, float(np.linalg.norm(matrix))):
        raise PoleHit(f"lambda={lam} is a Dirichlet eigenvalue")

    psi = np.zeros(n_max + 1, dtype=complex)
    psi[0] = 1.0
    if n_max >= 1:
        psi[1] = (rho - matrix[1, 1]) / lower_left
    for n in range(1, n_max):
        psi[n + 1] = (lam * psi[n] - op.amplitude(n) * psi[n - 1]) / op.amplitude(n + 1)
    return psi


# === Facade ===

@dataclass(frozen=True)
class SpectralData:
    """Everything the spectrum command reports for one operator."""
    delta: DeltaPolynomial
    curve: SpectralCurve
    divisor: DivisorData


class SpectralAnalyzer:
    """Builds the full spectral picture of an operator under one tolerance set."""

    def __init__(self, tol: Optional[ToleranceConfig] = None):
        self.tol = tol or ToleranceConfig()

    def delta(self, op: PeriodicOperator) -> DeltaPolynomial:
        return delta_from_monodromy(op, self.tol)

    def analyze(self, op: PeriodicOperator, require_nonsingular: bool = False) -> SpectralData:
        """Discriminant, curve and resolved divisor.

        Args:
            op: Operator
            require_nonsingular: raise SingularCurve instead of reporting it

        Returns:
            SpectralData; the divisor is resolved only on a nonsingular curve
        """
        delta = self.delta(op)
        curve = spectral_curve(delta, self.tol)
        if not curve.nonsingular and require_nonsingular:
            raise SingularCurve(
                f"multiple branch point (min separation {curve.min_separation:.3e})"
            )
        divisor = dirichlet_spectrum(op, self.tol)
        if curve.nonsingular:
            divisor = resolve_divisor_sheets(op, delta, divisor, self.tol)
        return SpectralData(delta=delta, curve=curve, divisor=divisor)


def get_spectral_analyzer(tol: Optional[ToleranceConfig] = None) -> SpectralAnalyzer:
    """Get a SpectralAnalyzer instance.

    Returns:
        SpectralAnalyzer instance
    """
    return SpectralAnalyzer(tol)
