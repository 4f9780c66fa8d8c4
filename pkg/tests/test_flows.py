"""Tests for the Volterra hierarchy and its integration."""

import numpy as np
import pytest

from modules.errors import InvalidRange, OutOfRange, StepLimitExceeded
from modules.flows import (
    bi_hamiltonian_residual, commutativity_check, conservation_report, get_flow_integrator,
    higher_rhs, integrate, lie_bracket_fd, locality_defect, volterra_rhs
)
from modules.lattice import new_operator, random_operator


def test_volterra_rhs_example():
    np.testing.assert_array_equal(volterra_rhs([1.0, 2.0, 3.0]), [-1.0, 4.0, -3.0])


def test_volterra_rhs_constant_lattice():
    np.testing.assert_array_equal(volterra_rhs(np.full(7, 1.3)), np.zeros(7))


def test_first_higher_flow_is_volterra(op_t7):
    np.testing.assert_array_equal(higher_rhs(op_t7, 1), volterra_rhs(op_t7.c))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_divergence_identity(op_t7, k):
    rhs = higher_rhs(op_t7, k)
    assert abs(np.sum(rhs / op_t7.c)) < 1e-12 * max(1.0, np.max(np.abs(rhs)))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_both_brackets_generate_the_same_flow(op_t7, k):
    assert bi_hamiltonian_residual(op_t7, k) < 1e-9


def test_higher_rhs_out_of_range(op_t7):
    with pytest.raises(OutOfRange):
        higher_rhs(op_t7, 4)


def test_locality_radius():
    op = random_operator(5, seed=21)
    for k in range(1, op.genus):
        assert locality_defect(op, k) == 0.0


def test_constant_lattice_is_fixed_point():
    op = new_operator(np.full(5, 1.2))
    traj = integrate(op, 2, 1.0)
    np.testing.assert_allclose(traj.states, np.tile(op.c, (traj.states.shape[0], 1)), atol=1e-12)


def test_invariants_conserved_along_volterra_flow(op_t7):
    traj = integrate(op_t7, 1, 10.0)
    assert np.all(np.diff(traj.times) > 0)
    rows = conservation_report(traj, op_t7)
    for row in rows:
        if row.required:
            assert row.max_relative_drift < 1e-7, row


def test_time_reversal(small_op):
    assert get_flow_integrator().time_reversal_error(small_op, 1, 2.0) < 1e-7


def test_backward_times_are_negative(small_op):
    traj = integrate(small_op, 1, 1.0, direction=-1)
    assert traj.times[-1] == -1.0


def test_integrate_rejects_bad_duration(small_op):
    with pytest.raises(InvalidRange):
        integrate(small_op, 1, 0.0)


def test_step_limit(small_op):
    with pytest.raises(StepLimitExceeded):
        integrate(small_op, 1, 0.5, max_halvings=1, endpoint_tol=0.0)


def test_commutativity_order():
    op = random_operator(2, seed=13)
    result = commutativity_check(op, 1, 2)
    assert 4.0 <= result.ratio <= 16.0
    assert result.passed


def test_commutativity_same_flow_is_exact(small_op):
    result = commutativity_check(small_op, 2, 2)
    assert result.residual == 0.0
    assert result.passed


def test_lie_bracket_vanishes(op_t7):
    bracket = lie_bracket_fd(op_t7, 1, 2)
    assert np.max(np.abs(bracket)) < 1e-6 * max(1.0, np.max(op_t7.c)) ** 5


def test_flow_checks_pass(small_op):
    reports = get_flow_integrator().flow_checks(small_op, t_end=2.0)
    assert all(r.passed for r in reports), [r for r in reports if not r.passed]
