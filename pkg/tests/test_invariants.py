"""Tests for the Lax matrix, integrals J_k, log expansions and the Q-form checks."""

import numpy as np
import pytest

from config.settings import BracketKind
from modules.errors import NearBranchPoint, OutOfRange, SingularCurve
from modules.invariants import (
    expand_log_delta, expand_log_rho, invariant_set, j_from_i, j_trace, lax_matrix,
    lemma_limit_sequence, limit_decay_ratios, q_form, theorem_a_check, theorem_b_check
)
from modules.lattice import new_operator, random_operator
from modules.spectral import delta_from_monodromy, spectral_curve
from utils.helpers import multiset_distance


def test_lax_matrix_constant_lattice(constant_lattice):
    matrix = lax_matrix(constant_lattice)
    np.testing.assert_array_equal(matrix, np.ones((3, 3)) - np.eye(3))
    np.testing.assert_allclose(np.linalg.eigvalsh(matrix), [-1.0, -1.0, 2.0], atol=1e-14)


def test_lax_matrix_structure(op_t7):
    matrix = lax_matrix(op_t7)
    np.testing.assert_array_equal(matrix, matrix.T)
    assert np.trace(matrix) == 0.0
    assert np.count_nonzero(matrix) == 2 * op_t7.period
    assert matrix[0, 1] == op_t7.a[1]
    assert matrix[op_t7.period - 1, 0] == op_t7.a[0]


@pytest.mark.parametrize("twist, family", [(1, "branch_points_plus"), (-1, "branch_points_minus")])
def test_lax_eigenvalues_are_branch_points(acceptance_op, twist, family):
    curve = spectral_curve(delta_from_monodromy(acceptance_op))
    eigenvalues = np.linalg.eigvalsh(lax_matrix(acceptance_op, twist=twist))
    radius = float(np.max(np.abs(eigenvalues)))
    assert multiset_distance(eigenvalues, getattr(curve, family)) < 1e-8 * radius


def test_j_trace_first_integrals(op_t7):
    assert j_trace(op_t7, 1) == pytest.approx(float(np.sum(op_t7.c)), rel=1e-13)
    assert j_trace(op_t7, 0) == pytest.approx(float(np.sum(np.log(op_t7.a))), rel=1e-13)
    assert j_trace(new_operator([1.0, 1.0, 1.0]), 1) == pytest.approx(3.0)


def test_j_trace_out_of_range(small_op):
    with pytest.raises(OutOfRange):
        j_trace(small_op, 3)


def test_j_from_i_low_orders():
    op = random_operator(2, seed=5)
    delta = delta_from_monodromy(op)
    ratio_1 = delta.I[1] / delta.I[0]
    ratio_2 = delta.I[2] / delta.I[0]
    assert j_from_i(delta, 1) == pytest.approx(ratio_1, rel=1e-14)
    assert j_from_i(delta, 2) == pytest.approx(0.5 * ratio_1 ** 2 - ratio_2, rel=1e-12)
    assert j_trace(op, 2) == pytest.approx(0.5 * ratio_1 ** 2 - ratio_2, rel=1e-9)


def test_j_from_i_matches_traces(acceptance_op):
    delta = delta_from_monodromy(acceptance_op)
    for k in range(1, acceptance_op.genus + 1):
        expected = j_trace(acceptance_op, k)
        assert abs(j_from_i(delta, k) - expected) / abs(expected) < 1e-9


@pytest.mark.parametrize("seed", [0, 4, 19, 42])
def test_j_from_i_matches_traces_at_large_genus(seed):
    op = random_operator(10, seed)
    delta = delta_from_monodromy(op)
    for k in range(1, op.genus + 1):
        expected = j_trace(op, k)
        assert abs(j_from_i(delta, k) - expected) / abs(expected) < 1e-9


def test_j_from_i_out_of_range(small_op):
    with pytest.raises(OutOfRange):
        j_from_i(delta_from_monodromy(small_op), 0)


def test_log_delta_expansion_carries_minus_j(acceptance_op):
    delta = delta_from_monodromy(acceptance_op)
    expansion = expand_log_delta(delta)
    j_values = invariant_set(acceptance_op).J
    assert expansion.log_coefficient == acceptance_op.period
    assert expansion.coefficients[1] == pytest.approx(-delta.I[1] / delta.I[0], rel=1e-13)
    np.testing.assert_allclose(expansion.coefficients, -j_values, rtol=1e-9, atol=1e-9)


def test_log_delta_expansion_evaluates_close_to_log_delta(small_op):
    delta = delta_from_monodromy(small_op)
    lam = 40.0
    expansion = expand_log_delta(delta, order=small_op.genus + 1)
    assert expansion.evaluate(lam).real == pytest.approx(np.log(delta.evaluate(lam)), rel=1e-10)


def test_expansion_order_limits(small_op):
    with pytest.raises(OutOfRange):
        expand_log_delta(delta_from_monodromy(small_op), order=small_op.genus + 2)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_log_rho_fit_recovers_j(n, tol):
    op = random_operator(n, seed=200 + n)
    delta = delta_from_monodromy(op)
    expansion = expand_log_rho(op, delta, tol=tol)
    j_values = invariant_set(op).J
    assert expansion.log_coefficient == -op.period
    error = np.abs(expansion.coefficients - j_values) / np.maximum(np.abs(j_values), 1.0)
    assert np.max(error) < 1e-6
    assert expansion.consistency < 1e-6


def test_log_rho_fit_on_singular_curve(constant_lattice):
    delta = delta_from_monodromy(constant_lattice)
    expansion = expand_log_rho(constant_lattice, delta)
    np.testing.assert_allclose(expansion.coefficients, [0.0, 3.0], atol=1e-9)


def test_lemma_limit_decays(small_op):
    values = lemma_limit_sequence(delta_from_monodromy(small_op))
    assert np.all(values[1:] < values[:-1])


def test_lemma_limit_ratios_are_finite(acceptance_op):
    ratios = limit_decay_ratios(lemma_limit_sequence(delta_from_monodromy(acceptance_op)))
    assert np.all(np.isfinite(ratios))
    assert np.all(ratios < 1.0)


def test_limit_decay_ratios_handle_zeros():
    np.testing.assert_array_equal(limit_decay_ratios([4.0, 2.0, 0.0, 0.0]), [0.5, 0.0, 0.0])
    assert limit_decay_ratios([0.0, 1e-300])[0] == np.inf


def test_q_form_brackets_differ_by_lambda_squared(small_op):
    delta = delta_from_monodromy(small_op)
    lam = 3.0 * spectral_curve(delta).max_branch_modulus
    quadratic = q_form(delta, lam, BracketKind.QUADRATIC)
    cubic = q_form(delta, lam, BracketKind.CUBIC)
    assert cubic == pytest.approx(quadratic / lam ** 2, rel=1e-13)
    assert abs(np.imag(quadratic)) < 1e-15


@pytest.mark.parametrize("bracket", list(BracketKind))
@pytest.mark.parametrize("n", [1, 3, 5])
def test_theorem_a(n, bracket):
    op = random_operator(n, seed=300 + n)
    report = theorem_a_check(op, bracket)
    assert report.passed, report


@pytest.mark.parametrize("bracket", list(BracketKind))
@pytest.mark.parametrize("n", [1, 2, 5])
def test_theorem_b(n, bracket):
    delta = delta_from_monodromy(random_operator(n, seed=400 + n))
    report = theorem_b_check(delta, bracket)
    assert report.passed, report


def test_theorem_b_index_not_varied(small_op):
    delta = delta_from_monodromy(small_op)
    with pytest.raises(OutOfRange):
        theorem_b_check(delta, BracketKind.QUADRATIC, k=0)
    with pytest.raises(OutOfRange):
        theorem_b_check(delta, BracketKind.CUBIC, k=small_op.genus)


def test_theorem_b_rejects_branch_point_samples(small_op):
    delta = delta_from_monodromy(small_op)
    branch = spectral_curve(delta).branch_points_plus[0]
    with pytest.raises(NearBranchPoint):
        theorem_b_check(delta, BracketKind.CUBIC, lam_samples=[branch, 0.3 + 1.1j])


def test_theorem_b_needs_nonsingular_curve(constant_lattice):
    with pytest.raises(SingularCurve):
        theorem_b_check(delta_from_monodromy(constant_lattice), BracketKind.QUADRATIC)
