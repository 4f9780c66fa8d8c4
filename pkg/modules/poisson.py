#!/usr/bin/env python3
"""
The quadratic and cubic Poisson brackets on weights, gradients of the spectral
functions, and the checks built on them.

Every function of interest exposes a gradient with respect to c, and a bracket
is evaluated as grad(f)^T P(c) grad(g) with the dense structure matrix P.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import GENERATING_LAMBDA_SAMPLES, MAX_SHEET_RETRIES
from config.settings import BracketKind, ToleranceConfig
from modules.errors import CanonicityFailure, LengthMismatch, OutOfRange, SheetFlip
from modules.invariants import lax_matrix
from modules.lattice import PeriodicOperator, perturb
from modules.spectral import (
    DeltaPolynomial, delta_from_monodromy, dirichlet_eigensystem, dirichlet_spectrum,
    monodromy_derivatives, resolve_divisor_sheets, subset_array
)
from utils.helpers import unit_vector
from utils.schemas import CheckReport

logger = logging.getLogger(__name__)

# g_i = df/dc_i, length T
Gradient = np.ndarray

# (row offset, column offset, sign, factor offsets) relative to site i
_STRUCTURE_TERMS = {
    BracketKind.QUADRATIC: [
        (0, 1, 1.0, (0, 1)),
        (0, -1, -1.0, (0, -1)),
    ],
    BracketKind.CUBIC: [
        (0, 1, 1.0, (0, 0, 1)),
        (0, 1, 1.0, (0, 1, 1)),
        (0, -1, -1.0, (0, 0, -1)),
        (0, -1, -1.0, (0, -1, -1)),
        (0, 2, 1.0, (0, 1, 2)),
        (0, -2, -1.0, (0, -1, -2)),
    ],
}


# === Structure tensors ===

def structure_matrix(kind: BracketKind, c: Sequence[float]) -> np.ndarray:
    """Dense antisymmetric matrix P[i, j] = {c_i, c_j}.

    Coinciding cyclic offsets (T = 3, where i+2 = i-1) add up.
    """
    c = np.asarray(c, dtype=float)
    period = c.size
    matrix = np.zeros((period, period))
    for i in range(period):
        for row, col, sign, factors in _STRUCTURE_TERMS[kind]:
            value = sign * np.prod([c[(i + f) % period] for f in factors])
            matrix[(i + row) % period, (i + col) % period] += value
    return matrix


def structure_derivative(kind: BracketKind, c: Sequence[float]) -> np.ndarray:
    """D[i, j, l] = dP[i, j]/dc_l, differentiated term by term."""
    c = np.asarray(c, dtype=float)
    period = c.size
    tensor = np.zeros((period, period, period))
    for i in range(period):
        for row, col, sign, factors in _STRUCTURE_TERMS[kind]:
            sites = [(i + f) % period for f in factors]
            r, s = (i + row) % period, (i + col) % period
            for position, site in enumerate(sites):
                others = sites[:position] + sites[position + 1:]
                tensor[r, s, site] += sign * np.prod(c[others])
    return tensor


def bracket_eval(kind: BracketKind, gf: Gradient, gg: Gradient, c: Sequence[float]) -> float:
    """{f, g} = sum_{i<j} P[i, j] (gf_i gg_j - gf_j gg_i).

    Summing the antisymmetrized upper triangle makes swapping f and g negate
    every term exactly.
    """
    gf = np.asarray(gf, dtype=float)
    gg = np.asarray(gg, dtype=float)
    c = np.asarray(c, dtype=float)
    if not gf.shape == gg.shape == c.shape:
        raise LengthMismatch(f"gradient lengths {gf.size}, {gg.size} vs period {c.size}")
    outer = np.outer(gf, gg)
    upper = np.triu_indices(c.size, k=1)
    return float(np.sum(structure_matrix(kind, c)[upper] * (outer - outer.T)[upper]))


def bracket_matrix(kind: BracketKind, left: np.ndarray, right: np.ndarray,
                   c: Sequence[float]) -> np.ndarray:
    """All brackets between the rows of two gradient stacks."""
    return np.asarray(left) @ structure_matrix(kind, c) @ np.asarray(right).T


# === Gradients ===

def grad_i(op: PeriodicOperator, i: int) -> Gradient:
    """dI_i/dc = -I_i/(2c) + I_0 d(sum over subsets of prod c)/dc."""
    subsets = subset_array(op.period, i)
    i0 = 1.0 / float(np.prod(op.a))
    products = np.prod(op.c[subsets], axis=1)
    value = i0 * float(np.sum(products))
    grad = -value / (2.0 * op.c)
    for column in range(i):
        members = subsets[:, column]
        np.add.at(grad, members, i0 * products / op.c[members])
    return grad


def grad_j(op: PeriodicOperator, k: int) -> Gradient:
    """dJ_k/dc_i = (L**(2k-1))[i-1, i] / a_i; k = 0 gives 1/(2c)."""
    if k < 0 or k > op.genus:
        raise OutOfRange(f"k={k} outside 0..{op.genus}")
    if k == 0:
        return 0.5 / op.c
    power = np.linalg.matrix_power(lax_matrix(op), 2 * k - 1)
    sites = np.arange(op.period)
    return power[sites - 1, sites] / op.a


def grad_dirichlet(op: PeriodicOperator, k: int, tol: Optional[ToleranceConfig] = None) -> Gradient:
    """Gradient of the k-th positive Dirichlet eigenvalue (k = 0..N-1, ascending).

    First-order perturbation: d(lambda) = v^T dB v, and a_i sits in B at
    rows/columns (i-2, i-1) for i = 2..T-1.
    """
    if k < 0 or k >= op.genus:
        raise OutOfRange(f"Dirichlet index {k} outside 0..{op.genus - 1}")
    dirichlet_spectrum(op, tol)
    _, vectors = dirichlet_eigensystem(op)
    v = vectors[:, op.genus + k]
    grad = np.zeros(op.period)
    sites = np.arange(2, op.period)
    grad[sites] = v[sites - 2] * v[sites - 1] / op.a[sites]
    return grad


def fd_gradient(op: PeriodicOperator, func: Callable[[PeriodicOperator], float],
                tol: Optional[ToleranceConfig] = None) -> Gradient:
    """Central differences with h_i = fd_step * max(1, c_i) and one Richardson step."""
    tol = tol or ToleranceConfig()
    grad = np.zeros(op.period)
    for i in range(op.period):
        step = tol.fd_step * max(1.0, op.c[i])

        def central(h: float) -> float:
            return (func(perturb(op, i, h)) - func(perturb(op, i, -h))) / (2.0 * h)

        grad[i] = (4.0 * central(step / 2.0) - central(step)) / 3.0
    return grad


# === Canonical coordinates ===

@dataclass(frozen=True)
class CanonicalChart:
    """q_k = lambda_k and p_k = 2 ln|rho_k| / lambda_k**m for one bracket."""
    q: np.ndarray
    p: np.ndarray
    sheet: np.ndarray
    kind: BracketKind


def canonical_chart(op: PeriodicOperator, kind: BracketKind, tol: Optional[ToleranceConfig] = None,
                    delta: Optional[DeltaPolynomial] = None) -> CanonicalChart:
    """Resolve the divisor and build (q, p).

    rho_k is real at a divisor point but alternates in sign between gaps; the
    constant i*pi of its logarithm never enters a bracket, so |rho_k| is used.
    """
    tol = tol or ToleranceConfig()
    if delta is None:
        delta = delta_from_monodromy(op, tol)
    divisor = resolve_divisor_sheets(op, delta, dirichlet_spectrum(op, tol), tol)
    momenta = 2.0 * np.log(np.abs(divisor.rho.real)) / divisor.lam ** kind.momentum_exponent
    return CanonicalChart(q=divisor.lam.copy(), p=momenta, sheet=divisor.sheet.copy(), kind=kind)


def _tracked_fd(op: PeriodicOperator, kind: BracketKind, tol: ToleranceConfig,
                values: Callable[[CanonicalChart], np.ndarray]) -> np.ndarray:
    """FD Jacobian (N x T) of chart-valued functions, retrying smaller steps on a sheet change."""
    base = canonical_chart(op, kind, tol)
    jacobian = np.zeros((op.genus, op.period))
    for i in range(op.period):
        step = tol.fd_step * max(1.0, op.c[i])
        for attempt in range(MAX_SHEET_RETRIES + 1):
            charts = [canonical_chart(perturb(op, i, s * h), kind, tol)
                      for h in (step, step / 2.0) for s in (1, -1)]
            if all(np.array_equal(chart.sheet, base.sheet) for chart in charts):
                break
            logger.warning("sheet changed under perturbation of c_%s, halving step to %.3e", i, step / 2.0)
            step /= 2.0
        else:
            raise SheetFlip(f"divisor sheet flips under perturbation of c_{i} after {MAX_SHEET_RETRIES} retries")
        up, down, half_up, half_down = (values(chart) for chart in charts)
        coarse = (up - down) / (2.0 * step)
        fine = (half_up - half_down) / step
        jacobian[:, i] = (4.0 * fine - coarse) / 3.0
    return jacobian


def grad_p(op: PeriodicOperator, k: int, kind: BracketKind,
           tol: Optional[ToleranceConfig] = None) -> Gradient:
    """Gradient of p_k by sheet-tracked central differences with one Richardson step.

    Raises:
        SheetFlip: the divisor sheet keeps changing after every step halving
    """
    if k < 0 or k >= op.genus:
        raise OutOfRange(f"momentum index {k} outside 0..{op.genus - 1}")
    return _tracked_fd(op, kind, tol or ToleranceConfig(), lambda chart: chart.p)[k]


def log_rho_gradients(op: PeriodicOperator, lam: np.ndarray, grad_q: np.ndarray) -> np.ndarray:
    """Rows are the gradients of 2 ln|rho_k| at the Dirichlet eigenvalues lam.

    rho_k = m11(lambda_k(c), c) for the monodromy started at site 1, so its
    total derivative adds dm11/dlambda times grad(lambda_k). On the Dirichlet
    locus m21 = 0 and det M = 1, hence d ln m11 = -d ln m22; the larger of the
    two diagonal entries is the one divided by.
    """
    rows = np.zeros((lam.size, op.period))
    for k, (value, row) in enumerate(zip(lam, grad_q)):
        matrix, d_c, d_lam = monodromy_derivatives(op, float(value), start=1)
        total = d_c + d_lam[None, :, :] * row[:, None, None]
        if abs(matrix[0, 0]) >= abs(matrix[1, 1]):
            rows[k] = 2.0 * total[:, 0, 0] / matrix[0, 0]
        else:
            rows[k] = -2.0 * total[:, 1, 1] / matrix[1, 1]
    return rows


def _momentum_gradients(op: PeriodicOperator, chart: CanonicalChart, grad_q: np.ndarray) -> np.ndarray:
    # p = 2 ln|rho| / lambda**m
    exponent = chart.kind.momentum_exponent
    log_rho = log_rho_gradients(op, chart.q, grad_q)
    return (log_rho / chart.q[:, None] ** exponent
            - exponent * (chart.p / chart.q)[:, None] * grad_q)


def grad_momenta(op: PeriodicOperator, kind: BracketKind,
                 tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """Rows are the analytic gradients of p_1..p_N."""
    tol = tol or ToleranceConfig()
    chart = canonical_chart(op, kind, tol)
    return _momentum_gradients(op, chart, _dirichlet_gradients(op, tol))


def grad_log_rho(op: PeriodicOperator, k: int, tol: Optional[ToleranceConfig] = None) -> Gradient:
    """Gradient of 2 ln|rho_k|, independent of the bracket."""
    if k < 0 or k >= op.genus:
        raise OutOfRange(f"momentum index {k} outside 0..{op.genus - 1}")
    divisor = dirichlet_spectrum(op, tol)
    return log_rho_gradients(op, divisor.lam[k:k + 1], grad_dirichlet(op, k, tol)[None, :])[0]


# === Checks ===

def _dirichlet_gradients(op: PeriodicOperator, tol: ToleranceConfig) -> np.ndarray:
    return np.array([grad_dirichlet(op, k, tol) for k in range(op.genus)])


def verify_involution(op: PeriodicOperator, kind: BracketKind,
                      tol: Optional[ToleranceConfig] = None) -> CheckReport:
    """max |{+-lambda_i, +-lambda_j}| with analytic Dirichlet gradients."""
    tol = tol or ToleranceConfig()
    divisor = dirichlet_spectrum(op, tol)
    grads = _dirichlet_gradients(op, tol)
    signed = np.vstack([grads, -grads])
    worst = float(np.max(np.abs(bracket_matrix(kind, signed, signed, op.c))))
    threshold = tol.involution_tol * max(1.0, float(np.max(divisor.lam)) ** 3)
    return CheckReport(name=f"involution_{kind.value}", max_residual=worst,
                       tolerance=threshold, passed=worst < threshold)


@dataclass
class CanonicalReport:
    """Bracket matrices of the chart and the divisor points whose sheet was flipped."""
    kind: BracketKind
    qp: np.ndarray
    pp: np.ndarray
    tolerance: float
    flipped: List[int] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        identity_defect = np.max(np.abs(self.qp - np.eye(self.qp.shape[0])))
        return float(max(identity_defect, np.max(np.abs(self.pp))))

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance


def verify_canonical(op: PeriodicOperator, kind: BracketKind, tol: Optional[ToleranceConfig] = None,
                     delta: Optional[DeltaPolynomial] = None) -> CanonicalReport:
    """{q_i, p_j} = delta_ij and {p_i, p_j} = 0.

    A diagonal entry near -1 means the divisor point sits on the other sheet
    for this chart; rho_k -> 1/rho_k negates p_k and the check is rerun once.

    Raises:
        CanonicityFailure: neither sheet assignment gives the identity
    """
    tol = tol or ToleranceConfig()
    grad_q = _dirichlet_gradients(op, tol)
    grad_mom = _momentum_gradients(op, canonical_chart(op, kind, tol, delta), grad_q)
    report = CanonicalReport(kind=kind, qp=bracket_matrix(kind, grad_q, grad_mom, op.c),
                             pp=bracket_matrix(kind, grad_mom, grad_mom, op.c), tolerance=tol.canonical_tol)
    if not report.passed:
        flipped = [k for k in range(op.genus) if abs(report.qp[k, k] + 1.0) < tol.canonical_tol]
        if flipped:
            logger.warning("flipping divisor sheets %s for the %s chart", flipped, kind.value)
            grad_mom[flipped] *= -1.0
            report = CanonicalReport(kind=kind, qp=bracket_matrix(kind, grad_q, grad_mom, op.c),
                                     pp=bracket_matrix(kind, grad_mom, grad_mom, op.c),
                                     tolerance=tol.canonical_tol, flipped=flipped)
    if not report.passed:
        raise CanonicityFailure(f"{kind.value} chart not canonical (defect {report.max_residual:.3e})")
    logger.info("%s chart canonical, defect %.3e", kind.value, report.max_residual)
    return report


def _invariant_scale(op: PeriodicOperator, i_values: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(i_values))) * max(1.0, float(np.max(op.c))) ** 3)


def _integral_gradients(op: PeriodicOperator) -> np.ndarray:
    return np.array([grad_i(op, i) for i in range(op.genus + 1)])


def verify_annulator(op: PeriodicOperator, tol: Optional[ToleranceConfig] = None,
                     delta: Optional[DeltaPolynomial] = None) -> CheckReport:
    """max_i |{A, c_i}| for the annulator A of each bracket (I_0 quadratic, I_N cubic)."""
    tol = tol or ToleranceConfig()
    if delta is None:
        delta = delta_from_monodromy(op, tol)
    coordinates = np.eye(op.period)
    worst, details = 0.0, []
    for kind in BracketKind:
        index = kind.annulator_index(op.genus)
        residual = float(np.max(np.abs(bracket_matrix(kind, grad_i(op, index)[None, :], coordinates, op.c))))
        details.append(f"{kind.annulator}={residual!r}")
        worst = max(worst, residual)
    threshold = tol.annulator_tol * _invariant_scale(op, delta.I)
    return CheckReport(name="annulators", max_residual=worst, tolerance=threshold,
                       passed=worst < threshold, detail=" ".join(details))


def lenard_magri_residuals(op: PeriodicOperator, gf: Gradient,
                           grads: Optional[np.ndarray] = None) -> np.ndarray:
    """{I_0,f}_1, {I_k,f}_2 + {I_{k+1},f}_1 for k < N, and {I_N,f}_2."""
    grads = _integral_gradients(op) if grads is None else grads
    first = bracket_matrix(BracketKind.QUADRATIC, grads, np.asarray(gf)[None, :], op.c)[:, 0]
    second = bracket_matrix(BracketKind.CUBIC, grads, np.asarray(gf)[None, :], op.c)[:, 0]
    return np.concatenate([[first[0]], second[:-1] + first[1:], [second[-1]]])


def lenard_magri_check(op: PeriodicOperator, gf: Gradient, tol: Optional[ToleranceConfig] = None,
                       delta: Optional[DeltaPolynomial] = None,
                       grads: Optional[np.ndarray] = None) -> CheckReport:
    """The N+2 residuals of the Lenard-Magri chain for one test gradient."""
    tol = tol or ToleranceConfig()
    gf = np.asarray(gf, dtype=float)
    if gf.size != op.period:
        raise LengthMismatch(f"gradient length {gf.size} vs period {op.period}")
    if delta is None:
        delta = delta_from_monodromy(op, tol)
    residuals = lenard_magri_residuals(op, gf, grads)
    worst = float(np.max(np.abs(residuals)))
    threshold = tol.lenard_magri_tol * _invariant_scale(op, delta.I) * max(1.0, float(np.max(np.abs(gf))))
    return CheckReport(name="lenard_magri", max_residual=worst, tolerance=threshold, passed=worst < threshold)


def generating_identity_check(op: PeriodicOperator, gf: Gradient, lam_samples: Optional[np.ndarray] = None,
                              seed: int = 0, tol: Optional[ToleranceConfig] = None,
                              delta: Optional[DeltaPolynomial] = None,
                              grads: Optional[np.ndarray] = None) -> CheckReport:
    """{Delta(lambda), f}_2 = lambda**2 {Delta(lambda), f}_1 at sample points.

    The form lambda**2 {Delta, f}_2 = {Delta, f}_1 is evaluated too and its
    residual reported in the detail; it is not compared.
    """
    tol = tol or ToleranceConfig()
    gf = np.asarray(gf, dtype=float)
    if gf.size != op.period:
        raise LengthMismatch(f"gradient length {gf.size} vs period {op.period}")
    if lam_samples is None:
        lam_samples = np.random.default_rng(seed).uniform(-2.0, 2.0, size=GENERATING_LAMBDA_SAMPLES)
    grads = _integral_gradients(op) if grads is None else grads
    first = bracket_matrix(BracketKind.QUADRATIC, grads, gf[None, :], op.c)[:, 0]
    second = bracket_matrix(BracketKind.CUBIC, grads, gf[None, :], op.c)[:, 0]

    worst, displayed, tolerance = 0.0, 0.0, 0.0
    if delta is None:
        delta = delta_from_monodromy(op, tol)
    base_scale = _invariant_scale(op, delta.I) * max(1.0, float(np.max(np.abs(gf))))
    for lam in np.asarray(lam_samples, dtype=float):
        # dDelta/dI_i at lambda
        weights = (-1.0) ** np.arange(op.genus + 1) * lam ** (op.period - 2 * np.arange(op.genus + 1))
        delta_first = float(weights @ first)
        delta_second = float(weights @ second)
        worst = max(worst, abs(delta_second - lam ** 2 * delta_first))
        displayed = max(displayed, abs(lam ** 2 * delta_second - delta_first))
        term_scale = float(np.sum(np.abs(weights))) * max(1.0, lam ** 2)
        tolerance = max(tolerance, tol.lenard_magri_tol * term_scale * base_scale)
    return CheckReport(name="generating_identity", max_residual=worst, tolerance=tolerance,
                       passed=worst < tolerance, detail=f"displayed_form_residual={displayed!r}")


def jacobi_check(kind: BracketKind, c: Sequence[float], tol: Optional[ToleranceConfig] = None) -> CheckReport:
    """Cyclic sum {{c_i,c_j},c_k} + {{c_j,c_k},c_i} + {{c_k,c_i},c_j} over all triples."""
    tol = tol or ToleranceConfig()
    c = np.asarray(c, dtype=float)
    matrix = structure_matrix(kind, c)
    derivative = structure_derivative(kind, c)
    cyclic_sum = (np.einsum("ijl,lk->ijk", derivative, matrix)
                  + np.einsum("jkl,li->ijk", derivative, matrix)
                  + np.einsum("kil,lj->ijk", derivative, matrix))
    worst = float(np.max(np.abs(cyclic_sum)))
    degree = 3 if kind is BracketKind.QUADRATIC else 5
    threshold = tol.jacobi_tol * max(1.0, float(np.max(c))) ** degree
    return CheckReport(name=f"jacobi_{kind.value}", max_residual=worst, tolerance=threshold,
                       passed=worst < threshold)


class PoissonVerifier:
    """Runs the bracket checks for one operator under one tolerance set."""

    def __init__(self, tol: Optional[ToleranceConfig] = None, seed: int = 0):
        self.tol = tol or ToleranceConfig()
        self.seed = seed

    def test_gradients(self, op: PeriodicOperator, count: int) -> List[Gradient]:
        """Coordinate gradients e_i followed by seeded random ones."""
        rng = np.random.default_rng(self.seed)
        coordinates = [unit_vector(op.period, i) for i in range(op.period)]
        return coordinates + [rng.standard_normal(op.period) for _ in range(count)]

    def lenard_magri(self, op: PeriodicOperator, count: int,
                     delta: Optional[DeltaPolynomial] = None) -> Tuple[CheckReport, CheckReport]:
        """Worst chain and generating-identity reports over a batch of test gradients."""
        if delta is None:
            delta = delta_from_monodromy(op, self.tol)
        grads = _integral_gradients(op)
        gradients = self.test_gradients(op, count)
        chain = [lenard_magri_check(op, g, self.tol, delta, grads) for g in gradients]
        generating = [generating_identity_check(op, g, seed=self.seed, tol=self.tol, delta=delta, grads=grads)
                      for g in gradients]
        worst_chain = max(chain, key=lambda r: r.max_residual / r.tolerance)
        worst_generating = max(generating, key=lambda r: r.max_residual / r.tolerance)
        return worst_chain, worst_generating

    def canonical(self, op: PeriodicOperator, kind: BracketKind,
                  delta: Optional[DeltaPolynomial] = None) -> CheckReport:
        try:
            report = verify_canonical(op, kind, self.tol, delta)
        except CanonicityFailure as e:
            return CheckReport(name=f"canonical_{kind.value}", max_residual=float("inf"),
                               tolerance=self.tol.canonical_tol, passed=False, detail=e.reason)
        detail = f"flipped={report.flipped}" if report.flipped else None
        return CheckReport(name=f"canonical_{kind.value}", max_residual=report.max_residual,
                           tolerance=report.tolerance, passed=True, detail=detail)


def get_poisson_verifier(tol: Optional[ToleranceConfig] = None, seed: int = 0) -> PoissonVerifier:
    """Get a PoissonVerifier instance.

    Returns:
        PoissonVerifier instance
    """
    return PoissonVerifier(tol, seed)
