#!/usr/bin/env python3
"""
Property suites run by the verify command.

Each suite turns the identities of one area into CheckReport rows; the rows
of all requested suites come back sorted by name.
"""

import logging
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from config.constants import LENARD_MAGRI_GRADIENTS, SUITES
from config.settings import BracketKind, ToleranceConfig
from modules.errors import InvalidInputError
from modules.flows import get_flow_integrator
from modules.invariants import (
    expand_log_delta, expand_log_rho, invariant_set, j_from_i, lax_matrix, lemma_limit_sequence,
    limit_decay_ratios, theorem_a_check, theorem_b_check
)
from modules.lattice import PeriodicOperator
from modules.poisson import get_poisson_verifier, jacobi_check, verify_annulator, verify_involution
from modules.spectral import (
    SpectralData, delta_combinatorial, dirichlet_from_monodromy, get_spectral_analyzer,
    i_n_closed_form
)
from utils.helpers import max_relative_error, multiset_distance, relative_error
from utils.schemas import CheckReport

logger = logging.getLogger(__name__)


def _report(name: str, residual: float, tolerance: float, detail: Optional[str] = None) -> CheckReport:
    return CheckReport(name=name, max_residual=float(residual), tolerance=float(tolerance),
                       passed=bool(residual < tolerance), detail=detail)


def _coefficient_error(values: np.ndarray, targets: np.ndarray) -> float:
    """Componentwise error relative to max(1, |target|); J_0 may sit near zero."""
    values = np.asarray(values, dtype=float)
    targets = np.asarray(targets, dtype=float)
    return float(np.max(np.abs(values - targets) / np.maximum(np.abs(targets), 1.0)))


class VerificationSuite:
    """Acceptance checks for one operator, grouped into named suites."""

    def __init__(self, tol: Optional[ToleranceConfig] = None, seed: int = 0):
        self.tol = tol or ToleranceConfig()
        self.seed = seed
        self.analyzer = get_spectral_analyzer(self.tol)
        self.poisson = get_poisson_verifier(self.tol, seed)
        self.flows = get_flow_integrator(self.tol)
        self._suites: Dict[str, Callable[[PeriodicOperator, SpectralData], List[CheckReport]]] = {
            "spectral": self.spectral_checks,
            "invariants": self.invariant_checks,
            "poisson": self.poisson_checks,
            "theorem": self.theorem_checks,
            "flows": self.flow_checks,
        }

    def run(self, op: PeriodicOperator, suites: Iterable[str] = ("all",)) -> List[CheckReport]:
        """Run the named suites ("all" for every one).

        Raises:
            SingularCurve: the spectral curve has a multiple branch point
            InvalidInputError: unknown suite name
        """
        names = list(suites)
        if "all" in names:
            names = list(SUITES)
        unknown = [name for name in names if name not in self._suites]
        if unknown:
            raise InvalidInputError(f"unknown suite {unknown[0]}")

        data = self.analyzer.analyze(op, require_nonsingular=True)
        reports: List[CheckReport] = []
        for name in names:
            logger.info("running %s suite", name)
            reports.extend(self._suites[name](op, data))
        failed = [r.name for r in reports if not r.passed]
        if failed:
            logger.warning("failed checks: %s", ", ".join(failed))
        return sorted(reports, key=lambda r: r.name)

    def spectral_checks(self, op: PeriodicOperator, data: SpectralData) -> List[CheckReport]:
        reports = []
        combinatorial = delta_combinatorial(op)
        reports.append(_report("delta_two_routes", max_relative_error(data.delta.I, combinatorial.I),
                               self.tol.two_route_tol))
        reports.append(_report("i_n_closed_form",
                               relative_error(i_n_closed_form(op), combinatorial.I[-1]),
                               self.tol.two_route_tol))

        radius = float(np.max(np.abs(data.curve.branch_points)))
        periodic = np.linalg.eigvalsh(lax_matrix(op))
        antiperiodic = np.linalg.eigvalsh(lax_matrix(op, twist=-1))
        reports.append(_report("lax_eigenvalues",
                               multiset_distance(periodic, data.curve.branch_points_plus),
                               self.tol.lax_tol * radius))
        reports.append(_report("lax_twisted_eigenvalues",
                               multiset_distance(antiperiodic, data.curve.branch_points_minus),
                               self.tol.lax_tol * radius))
        reports.append(_report("dirichlet_two_routes",
                               multiset_distance(data.divisor.full_spectrum, dirichlet_from_monodromy(op)),
                               self.tol.lax_tol * radius))
        return reports

    def invariant_checks(self, op: PeriodicOperator, data: SpectralData) -> List[CheckReport]:
        reports = []
        j_values = invariant_set(op).J
        n = op.genus

        log_delta = expand_log_delta(data.delta)
        reports.append(_report("log_delta_expansion", _coefficient_error(log_delta.coefficients, -j_values),
                               self.tol.newton_tol))

        newton = np.array([j_from_i(data.delta, k) for k in range(1, n + 1)])
        reports.append(_report("newton_identities", max_relative_error(newton, j_values[1:]), self.tol.newton_tol))

        log_rho = expand_log_rho(op, data.delta, tol=self.tol)
        fit_error = max(_coefficient_error(log_rho.coefficients, j_values),
                        _coefficient_error(log_rho.coefficients, -log_delta.coefficients))
        reports.append(_report("log_rho_expansion", fit_error, self.tol.fit_tol,
                               detail=f"consistency={log_rho.consistency:.3e}"))

        limits = lemma_limit_sequence(data.delta, tol=self.tol)
        ratios = limit_decay_ratios(limits)
        reports.append(_report("log_rho_limit_decay", float(np.max(ratios)), 1.0,
                               detail=f"first={limits[0]!r} last={limits[-1]!r}"))
        return reports

    def poisson_checks(self, op: PeriodicOperator, data: SpectralData) -> List[CheckReport]:
        reports = [verify_annulator(op, self.tol, data.delta)]
        reports.extend(self.poisson.lenard_magri(op, LENARD_MAGRI_GRADIENTS, data.delta))
        for kind in BracketKind:
            reports.append(verify_involution(op, kind, self.tol))
            reports.append(self.poisson.canonical(op, kind, data.delta))
            reports.append(jacobi_check(kind, op.c, self.tol))
        return reports

    def theorem_checks(self, op: PeriodicOperator, data: SpectralData) -> List[CheckReport]:
        reports = []
        for kind in BracketKind:
            reports.append(theorem_a_check(op, kind, self.tol, delta=data.delta))
            reports.append(theorem_b_check(data.delta, kind, tol=self.tol))
        return reports

    def flow_checks(self, op: PeriodicOperator, data: SpectralData) -> List[CheckReport]:
        return self.flows.flow_checks(op)


def get_verification_suite(tol: Optional[ToleranceConfig] = None, seed: int = 0) -> VerificationSuite:
    """Get a VerificationSuite instance.

    Returns:
        VerificationSuite instance
    """
    return VerificationSuite(tol, seed)
