#!/usr/bin/env python3
"""
The Volterra flow, its higher commuting flows and their time integration.

The k-th flow is c' = P_1 grad J_k = P_2 grad J_{k-1}; for k = 1 it is
c_i' = c_i (c_{i+1} - c_{i-1}).
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from config.constants import (
    COMMUTATOR_EPS, COMMUTATOR_RATIO_RANGE, RK4_ENDPOINT_TOL, RK4_INITIAL_STEPS,
    RK4_MAX_HALVINGS
)
from config.settings import BracketKind, ToleranceConfig
from modules.errors import (
    InvalidRange, NonPositiveWeight, OutOfRange, PositivityLoss, StepLimitExceeded
)
from modules.invariants import j_trace
from modules.lattice import PeriodicOperator, new_operator, perturb
from modules.poisson import grad_j, structure_matrix
from modules.spectral import delta_from_monodromy, dirichlet_spectrum
from utils.helpers import max_relative_error
from utils.schemas import CheckReport, DriftRow

logger = logging.getLogger(__name__)

MAX_DRIFT_SAMPLES = 200


# === Vector fields ===

def volterra_rhs(c: np.ndarray) -> np.ndarray:
    """c_i (c_{i+1} - c_{i-1}), cyclic."""
    c = np.asarray(c, dtype=float)
    return c * (np.roll(c, -1) - np.roll(c, 1))


def _check_flow_index(op: PeriodicOperator, k: int):
    if k < 1 or k > op.genus:
        raise OutOfRange(f"flow index {k} outside 1..{op.genus}")


def higher_rhs(op: PeriodicOperator, k: int) -> np.ndarray:
    """k-th flow through the quadratic bracket: c_i (c_{i+1} g_{i+1} - c_{i-1} g_{i-1}), g = grad J_k."""
    _check_flow_index(op, k)
    scaled = op.c * grad_j(op, k)
    return op.c * (np.roll(scaled, -1) - np.roll(scaled, 1))


def higher_rhs_cubic(op: PeriodicOperator, k: int) -> np.ndarray:
    """k-th flow through the cubic bracket: P_2 grad J_{k-1}."""
    _check_flow_index(op, k)
    return structure_matrix(BracketKind.CUBIC, op.c) @ grad_j(op, k - 1)


def bi_hamiltonian_residual(op: PeriodicOperator, k: int) -> float:
    """Relative disagreement of the two bracket realizations of the k-th flow."""
    quadratic = higher_rhs(op, k)
    cubic = higher_rhs_cubic(op, k)
    scale = max(float(np.max(np.abs(quadratic))), 1e-300)
    return float(np.max(np.abs(quadratic - cubic))) / scale


def flow_field(k: int) -> Callable[[np.ndarray], np.ndarray]:
    """Vector field of the k-th flow on raw weight vectors; higher flows validate states as operators."""
    if k == 1:
        return volterra_rhs

    def field(c: np.ndarray) -> np.ndarray:
        return higher_rhs(new_operator(c), k)
    return field


def locality_defect(op: PeriodicOperator, k: int, relative_change: float = 0.1) -> float:
    """Largest change of rhs_i under perturbing some c_j at cyclic distance > k from i."""
    _check_flow_index(op, k)
    base = higher_rhs(op, k)
    worst = 0.0
    for j in range(op.period):
        moved = higher_rhs(perturb(op, j, relative_change * op.c[j]), k)
        for i in range(op.period):
            distance = min((i - j) % op.period, (j - i) % op.period)
            if distance > k:
                worst = max(worst, abs(moved[i] - base[i]))
    return worst


# === Integration ===

@dataclass
class Trajectory:
    """States c(t_m) on a uniform time grid."""
    times: np.ndarray
    states: np.ndarray
    flow: int
    steps: int
    step_error_estimate: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _rk4_run(field: Callable[[np.ndarray], np.ndarray], start: np.ndarray, t_end: float,
             steps: int, direction: int) -> Optional[np.ndarray]:
    """Fixed-step classical RK4; None if a state leaves the positive orthant."""
    h = direction * t_end / steps
    states = np.empty((steps + 1, start.size))
    states[0] = start
    y = start.copy()
    try:
        for m in range(steps):
            k1 = field(y)
            k2 = field(y + 0.5 * h * k1)
            k3 = field(y + 0.5 * h * k2)
            k4 = field(y + h * k3)
            y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not np.all(np.isfinite(y)) or np.any(y <= 0):
                return None
            states[m + 1] = y
    except NonPositiveWeight:
        return None
    return states


def integrate(op: PeriodicOperator, k: int, t_end: float, direction: int = 1,
              initial_steps: int = RK4_INITIAL_STEPS, max_halvings: int = RK4_MAX_HALVINGS,
              endpoint_tol: float = RK4_ENDPOINT_TOL) -> Trajectory:
    """Integrate the k-th flow over [0, t_end], halving the step until the endpoint settles.

    Args:
        op: Initial operator
        k: Flow index 1..N
        t_end: Positive duration
        direction: +1 forward, -1 backward in time
        initial_steps: Step count of the first attempt
        max_halvings: Halvings allowed before giving up
        endpoint_tol: Relative endpoint change accepted between consecutive step sizes

    Returns:
        Trajectory of the finer of the last two runs

    Raises:
        PositivityLoss: the finest run still leaves the positive orthant
        StepLimitExceeded: the endpoint has not settled after max_halvings
    """
    _check_flow_index(op, k)
    if not t_end > 0:
        raise InvalidRange(f"t_end={t_end} must be positive")
    if direction not in (-1, 1):
        raise InvalidRange(f"direction must be +1 or -1, got {direction}")

    field = flow_field(k)
    steps = initial_steps
    previous = _rk4_run(field, op.c.copy(), t_end, steps, direction)
    for _ in range(max_halvings):
        steps *= 2
        current = _rk4_run(field, op.c.copy(), t_end, steps, direction)
        if current is not None and previous is not None:
            change = float(np.max(np.abs(current[-1] - previous[-1]) / np.abs(current[-1])))
            logger.debug("flow %s, %s steps: endpoint change %.3e", k, steps, change)
            if change < endpoint_tol:
                logger.info("flow %s accepted with %s steps (estimate %.3e)", k, steps, change)
                times = direction * np.linspace(0.0, t_end, steps + 1)
                return Trajectory(times=times, states=current, flow=k, steps=steps,
                                  step_error_estimate=change)
        previous = current
    if previous is None:
        raise PositivityLoss(f"flow {k} leaves the positive orthant before t={t_end}")
    raise StepLimitExceeded(f"flow {k} endpoint not settled after {max_halvings} halvings")


# === Commutativity ===

def _euler_map(field: Callable[[np.ndarray], np.ndarray], x: np.ndarray, eps: float) -> np.ndarray:
    return x + eps * field(x)


def composition_residual(op: PeriodicOperator, k: int, l: int, eps: float) -> float:
    """max |phi_k(phi_l(x)) - phi_l(phi_k(x))| for first-order maps phi_j = x + eps X_j(x)."""
    field_k, field_l = flow_field(k), flow_field(l)
    x = op.c.copy()
    kl = _euler_map(field_k, _euler_map(field_l, x, eps), eps)
    lk = _euler_map(field_l, _euler_map(field_k, x, eps), eps)
    return float(np.max(np.abs(kl - lk)))


@dataclass(frozen=True)
class CommutativityReport:
    residual: float
    residual_half: float
    ratio: Optional[float]

    @property
    def passed(self) -> bool:
        if self.residual == 0.0:
            return True
        lo, hi = COMMUTATOR_RATIO_RANGE
        return self.ratio is not None and lo <= self.ratio <= hi


def commutativity_check(op: PeriodicOperator, k: int, l: int,
                        eps: float = COMMUTATOR_EPS) -> CommutativityReport:
    """Composition-order residual at eps and eps/2.

    The eps**2 term is the Lie bracket of the two fields, so commuting flows
    leave an eps**3 residual and a halving ratio near 8.
    """
    _check_flow_index(op, k)
    _check_flow_index(op, l)
    residual = composition_residual(op, k, l, eps)
    residual_half = composition_residual(op, k, l, eps / 2.0)
    ratio = residual / residual_half if residual_half > 0 else None
    logger.info("commutativity (%s, %s): residual %.3e, ratio %s", k, l, residual, ratio)
    return CommutativityReport(residual=residual, residual_half=residual_half, ratio=ratio)


def lie_bracket_fd(op: PeriodicOperator, k: int, l: int,
                   tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """[X_k, X_l] = DX_k X_l - DX_l X_k by central directional differences."""
    tol = tol or ToleranceConfig()
    field_k, field_l = flow_field(k), flow_field(l)
    x = op.c.copy()

    def directional(field: Callable[[np.ndarray], np.ndarray], direction: np.ndarray) -> np.ndarray:
        h = tol.fd_step * max(1.0, float(np.max(x))) / max(float(np.max(np.abs(direction))), 1e-300)
        return (field(x + h * direction) - field(x - h * direction)) / (2.0 * h)

    return directional(field_k, field_l(x)) - directional(field_l, field_k(x))


# === Conservation ===

def _drift(values: List[float]) -> float:
    series = np.asarray(values, dtype=float)
    return float(np.max(np.abs(series - series[0]))) / max(abs(series[0]), 1.0)


def conservation_report(traj: Trajectory, op: Optional[PeriodicOperator] = None,
                        lam_star: float = 0.5,
                        tol: Optional[ToleranceConfig] = None) -> List[DriftRow]:
    """Drift of I_0..I_N, J_0..J_N and Delta(lam_star) along a trajectory.

    Drifts are relative to max(1, |initial value|). The Dirichlet eigenvalues
    move along the flow; their drift is listed with required=False.
    """
    tol = tol or ToleranceConfig()
    stride = max(1, (traj.states.shape[0] - 1) // MAX_DRIFT_SAMPLES)
    indices = list(range(0, traj.states.shape[0], stride))
    if indices[-1] != traj.states.shape[0] - 1:
        indices.append(traj.states.shape[0] - 1)
    operators = [new_operator(traj.states[m]) for m in indices]
    if op is not None and not np.array_equal(op.c, operators[0].c):
        logger.warning("trajectory does not start at the given operator")

    deltas = [delta_from_monodromy(state, tol) for state in operators]
    n = operators[0].genus
    rows: List[DriftRow] = []
    for i in range(n + 1):
        drift = _drift([d.I[i] for d in deltas])
        rows.append(DriftRow(name=f"I_{i}", max_relative_drift=drift, conserved=drift < tol.drift_tol))
    for k in range(n + 1):
        drift = _drift([j_trace(state, k) for state in operators])
        rows.append(DriftRow(name=f"J_{k}", max_relative_drift=drift, conserved=drift < tol.drift_tol))
    drift = _drift([float(np.real(d.evaluate(lam_star))) for d in deltas])
    rows.append(DriftRow(name=f"Delta({lam_star!r})", max_relative_drift=drift, conserved=drift < tol.drift_tol))
    spectra = [dirichlet_spectrum(state, tol).lam for state in operators]
    for k in range(n):
        drift = _drift([lam[k] for lam in spectra])
        rows.append(DriftRow(name=f"lambda_{k + 1}", max_relative_drift=drift,
                             conserved=drift < tol.drift_tol, required=False))
    return rows


class FlowIntegrator:
    """Integrates flows and checks their conservation laws under one tolerance set."""

    def __init__(self, tol: Optional[ToleranceConfig] = None):
        self.tol = tol or ToleranceConfig()

    def evolve(self, op: PeriodicOperator, k: int, t_end: float):
        """Trajectory and its drift table."""
        traj = integrate(op, k, t_end)
        return traj, conservation_report(traj, op, tol=self.tol)

    def time_reversal_error(self, op: PeriodicOperator, k: int, t_end: float) -> float:
        forward = integrate(op, k, t_end)
        back = integrate(new_operator(forward.final), k, t_end, direction=-1)
        return max_relative_error(back.final, op.c)

    def flow_checks(self, op: PeriodicOperator, t_end: float = 10.0) -> List[CheckReport]:
        """First-flow identity, bi-Hamiltonian agreement, locality, conservation, commutativity."""
        n = op.genus
        reports = []
        first = float(np.max(np.abs(higher_rhs(op, 1) - volterra_rhs(op.c))))
        reports.append(CheckReport(name="flow_first_is_volterra", max_residual=first,
                                   tolerance=1e-15 * max(1.0, float(np.max(op.c))) ** 2,
                                   passed=first <= 1e-15 * max(1.0, float(np.max(op.c))) ** 2))

        bi = max(bi_hamiltonian_residual(op, k) for k in range(1, n + 1))
        reports.append(CheckReport(name="flow_bi_hamiltonian", max_residual=bi, tolerance=self.tol.eq_tol,
                                   passed=bi < self.tol.eq_tol))

        local = max((locality_defect(op, k) for k in range(1, n)), default=0.0)
        reports.append(CheckReport(name="flow_locality", max_residual=local, tolerance=0.0,
                                   passed=local == 0.0, detail=f"flows 1..{n - 1}"))

        _, rows = self.evolve(op, 1, t_end)
        required = [row for row in rows if row.required]
        drift = max(row.max_relative_drift for row in required)
        reports.append(CheckReport(name="flow_conservation", max_residual=drift, tolerance=self.tol.drift_tol,
                                   passed=drift < self.tol.drift_tol, detail=f"t_end={t_end!r}"))

        if n >= 2:
            result = commutativity_check(op, 1, 2)
            lo, hi = COMMUTATOR_RATIO_RANGE
            reports.append(CheckReport(name="flow_commutativity", max_residual=result.residual,
                                       tolerance=hi, passed=result.passed,
                                       detail=f"ratio={result.ratio!r} range=[{lo!r}, {hi!r}]"))
        return reports


def get_flow_integrator(tol: Optional[ToleranceConfig] = None) -> FlowIntegrator:
    """Get a FlowIntegrator instance.

    Returns:
        FlowIntegrator instance
    """
    return FlowIntegrator(tol)
