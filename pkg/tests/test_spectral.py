"""Tests for monodromy, discriminant, spectral curve, divisor and Bloch functions."""

import math

import numpy as np
import pytest

from modules.errors import BranchAmbiguity, OutOfRange, PoleHit, SingularCurve
from modules.lattice import new_operator, perturb, random_operator
from modules.spectral import (
    bloch_function, delta_combinatorial, delta_from_monodromy, dirichlet_from_monodromy,
    dirichlet_spectrum, enumerate_totally_disconnected, flip_divisor_point, floquet_pair,
    floquet_rho, get_spectral_analyzer, i_n_closed_form, monodromy, monodromy_at,
    monodromy_derivatives, resolve_divisor_sheets, spectral_curve, transfer_step
)
from utils.helpers import max_relative_error, multiset_distance


def test_constant_lattice_discriminant(constant_lattice):
    delta = delta_from_monodromy(constant_lattice)
    np.testing.assert_allclose(delta.I, [1.0, 3.0], atol=1e-14)
    assert delta.evaluate(2.0) == pytest.approx(2.0)


def test_monodromy_has_unit_determinant(small_op):
    det = monodromy(small_op).det()
    coef = np.zeros(det.coef.size)
    coef[0] = 1.0
    np.testing.assert_allclose(det.coef, coef, atol=1e-12)


def test_numeric_monodromy_matches_polynomial(small_op):
    lam = 0.4 + 0.9j
    for start in (0, 1):
        np.testing.assert_allclose(monodromy_at(small_op, lam, start),
                                   monodromy(small_op, start).evaluate(lam), rtol=1e-12)


def test_two_routes_agree(acceptance_op):
    monodromy_route = delta_from_monodromy(acceptance_op)
    combinatorial_route = delta_combinatorial(acceptance_op)
    assert max_relative_error(monodromy_route.I, combinatorial_route.I) < 1e-10


def test_closed_form_top_invariant(acceptance_op):
    expected = delta_combinatorial(acceptance_op).I[-1]
    assert abs(i_n_closed_form(acceptance_op) - expected) / expected < 1e-10


@pytest.mark.parametrize("period", [3, 5, 7, 9, 11])
def test_disconnected_subset_counts(period):
    for size in range((period - 1) // 2 + 1):
        count = len(enumerate_totally_disconnected(period, size))
        expected = period * math.comb(period - size, size) // (period - size)
        assert count == expected


def test_disconnected_subsets_lexicographic():
    assert enumerate_totally_disconnected(5, 2) == [(0, 2), (0, 3), (1, 3), (1, 4), (2, 4)]


def test_disconnected_subset_size_out_of_range():
    with pytest.raises(OutOfRange):
        enumerate_totally_disconnected(5, 3)


def test_constant_lattice_curve_is_singular(constant_lattice):
    curve = spectral_curve(delta_from_monodromy(constant_lattice))
    assert not curve.nonsingular
    assert multiset_distance(curve.branch_points_plus, [2.0, -1.0, -1.0]) < 1e-8
    assert multiset_distance(curve.branch_points_minus, [-2.0, 1.0, 1.0]) < 1e-8


def test_random_curve_is_nonsingular(acceptance_op):
    curve = spectral_curve(delta_from_monodromy(acceptance_op))
    assert curve.nonsingular
    assert curve.branch_points.size == 2 * acceptance_op.period


def test_dirichlet_spectrum_period_three():
    op = new_operator([0.7, 1.3, 2.5])
    np.testing.assert_allclose(dirichlet_spectrum(op).lam, [np.sqrt(2.5)])


def test_dirichlet_matches_monodromy_oracle(acceptance_op):
    divisor = dirichlet_spectrum(acceptance_op)
    assert np.all(np.diff(divisor.lam) > 0)
    assert np.all(divisor.lam > 0)
    assert multiset_distance(divisor.full_spectrum, dirichlet_from_monodromy(acceptance_op)) < 1e-8


def test_floquet_multipliers_are_reciprocal(small_op):
    delta = delta_from_monodromy(small_op)
    lam = np.array([0.3 + 0.8j, -1.7 + 0.2j, 5.0, 0.05])
    small, big = floquet_pair(delta, lam)
    np.testing.assert_allclose(small * big, np.ones(lam.size), rtol=1e-12)
    np.testing.assert_allclose(small + big, delta.evaluate(lam.astype(complex)), rtol=1e-10, atol=1e-12)


def test_minus_sheet_decays_at_infinity(small_op):
    delta = delta_from_monodromy(small_op)
    assert abs(floquet_rho(delta, 1e3, -1)) < 1e-10
    assert abs(floquet_rho(delta, 1e3, 1)) > 1e10


def test_band_values_have_unit_modulus(constant_lattice):
    delta = delta_from_monodromy(constant_lattice)
    rho = floquet_rho(delta, 0.5, -1, strict=False)
    assert abs(rho) == pytest.approx(1.0)
    assert rho.imag > 0
    assert floquet_rho(delta, 0.5, 1, strict=False) == pytest.approx(np.conj(rho))


def test_branch_point_is_ambiguous(constant_lattice):
    delta = delta_from_monodromy(constant_lattice)
    with pytest.raises(BranchAmbiguity):
        floquet_rho(delta, 2.0, -1)


def test_divisor_sheets_resolve(acceptance_op, tol):
    delta = delta_from_monodromy(acceptance_op)
    divisor = resolve_divisor_sheets(acceptance_op, delta, dirichlet_spectrum(acceptance_op), tol)
    assert divisor.resolved
    assert np.all(divisor.residual < tol.sheet_tol)
    assert np.all(np.abs(divisor.rho.imag) < 1e-9)
    for lam, rho in zip(divisor.lam, divisor.rho):
        assert monodromy_at(acceptance_op, lam, start=1)[0, 0] == pytest.approx(rho.real, rel=1e-7)


def test_flip_shifts_momentum_by_two_pi_i(small_op):
    data = get_spectral_analyzer().analyze(small_op)
    for m in (1, 3):
        flipped = flip_divisor_point(data.divisor, 0, m)
        assert flipped.lam == -data.divisor.lam[0]
        assert abs(flipped.shift.real) < 1e-12
        assert abs(abs(flipped.shift.imag) - 2.0 * np.pi) < 1e-9


def test_bloch_function_is_quasi_periodic(small_op):
    delta = delta_from_monodromy(small_op)
    lam = 0.3 + 0.7j
    psi = bloch_function(small_op, delta, lam, -1, 3 * small_op.period)
    rho = floquet_rho(delta, lam, -1)
    period = small_op.period
    np.testing.assert_allclose(psi[period:2 * period], rho * psi[:period], rtol=1e-8)


def test_bloch_function_pole_at_dirichlet_eigenvalue(small_op):
    delta = delta_from_monodromy(small_op)
    lam = dirichlet_spectrum(small_op).lam[0]
    with pytest.raises(PoleHit):
        bloch_function(small_op, delta, lam, -1, 5)


def test_analyzer_rejects_singular_curve(constant_lattice):
    analyzer = get_spectral_analyzer()
    assert not analyzer.analyze(constant_lattice).curve.nonsingular
    with pytest.raises(SingularCurve):
        analyzer.analyze(constant_lattice, require_nonsingular=True)


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_two_routes_over_many_seeds(n):
    for seed in range(20):
        op = random_operator(n, seed)
        assert max_relative_error(delta_from_monodromy(op).I, delta_combinatorial(op).I) < 1e-10


def test_transfer_step_matches_numeric_product(small_op):
    lam = 0.7 + 0.2j
    step = transfer_step(small_op, 3)
    values = np.array([[entry(lam) for entry in row] for row in step])
    a = small_op.a
    np.testing.assert_allclose(values, [[lam / a[4], -a[3] / a[4]], [1.0, 0.0]])
    # index 4 wraps onto site 0
    wrapped = transfer_step(small_op, 4)
    assert wrapped[0][1](lam) == pytest.approx(-a[4] / a[0])


@pytest.mark.parametrize("start", [0, 1])
def test_monodromy_derivatives_match_finite_differences(op_t7, start):
    lam, h = 1.3, 1e-6
    matrix, d_c, d_lam = monodromy_derivatives(op_t7, lam, start=start)
    np.testing.assert_allclose(matrix, monodromy_at(op_t7, lam, start=start), rtol=1e-13)
    numeric_lam = (monodromy_at(op_t7, lam + h, start) - monodromy_at(op_t7, lam - h, start)) / (2 * h)
    np.testing.assert_allclose(d_lam, numeric_lam, rtol=1e-6, atol=1e-8)
    for i in range(op_t7.period):
        numeric = (monodromy_at(perturb(op_t7, i, h), lam, start)
                   - monodromy_at(perturb(op_t7, i, -h), lam, start)) / (2 * h)
        np.testing.assert_allclose(d_c[i], numeric, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("n, seed", [(5, 0), (10, 19), (10, 3)])
def test_divisor_multiplier_is_the_boundary_entry(n, seed, tol):
    op = random_operator(n, seed)
    divisor = resolve_divisor_sheets(op, delta_from_monodromy(op), dirichlet_spectrum(op), tol)
    for lam, rho, sheet in zip(divisor.lam, divisor.rho, divisor.sheet):
        entry = monodromy_at(op, lam, start=1)[0, 0]
        assert rho.real == entry
        assert (abs(entry) > 1.0) == (sheet == 1)


def test_random_draws_are_nonsingular():
    draws = [spectral_curve(delta_from_monodromy(random_operator(3, seed))).nonsingular for seed in range(100)]
    assert sum(draws) >= 95


def test_bloch_function_grows_like_lambda_power(small_op):
    data = get_spectral_analyzer().analyze(small_op)
    radius = data.curve.max_branch_modulus
    lams = radius * np.array([16.0, 32.0, 64.0, 128.0])
    n_max = 2 * small_op.period
    psi = np.array([bloch_function(small_op, data.delta, lam, 1, n_max) for lam in lams])
    for n in range(1, n_max + 1):
        slope = np.polyfit(np.log(lams), np.log(np.abs(psi[:, n])), 1)[0]
        assert slope == pytest.approx(n, abs=0.05)
