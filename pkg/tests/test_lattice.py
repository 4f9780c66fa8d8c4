"""Tests for operator construction and validation."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modules.errors import EvenPeriod, InvalidRange, NonPositiveWeight, TooShort
from modules.lattice import new_operator, perturb, random_operator


def test_new_operator_stores_weights_and_amplitudes():
    op = new_operator([1.0, 4.0, 9.0])
    assert op.period == 3
    assert op.genus == 1
    np.testing.assert_array_equal(op.a, [1.0, 2.0, 3.0])


@pytest.mark.parametrize("weights, error", [
    ([1.0, 1.0], TooShort),
    ([1.0, 1.0, 1.0, 1.0], EvenPeriod),
    ([1.0, 0.0, 1.0], NonPositiveWeight),
    ([1.0, -2.0, 1.0], NonPositiveWeight),
    ([1.0, float("nan"), 1.0], NonPositiveWeight),
])
def test_new_operator_rejects_invalid_weights(weights, error):
    with pytest.raises(error):
        new_operator(weights)


def test_operator_arrays_are_read_only():
    op = new_operator([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        op.c[0] = 5.0


def test_random_operator_is_deterministic():
    assert random_operator(3, seed=42) == random_operator(3, seed=42)
    assert random_operator(3, seed=42) != random_operator(3, seed=43)


def test_random_operator_respects_range():
    op = random_operator(5, seed=1, weight_range=(0.5, 2.0))
    assert op.period == 11
    assert np.all((op.c >= 0.5) & (op.c <= 2.0))


def test_random_operator_accepts_degenerate_range():
    op = random_operator(2, seed=3, weight_range=(1.5, 1.5))
    np.testing.assert_array_equal(op.c, np.full(5, 1.5))


@pytest.mark.parametrize("n, weight_range", [(0, (0.5, 2.0)), (2, (0.0, 1.0)), (2, (2.0, 1.0))])
def test_random_operator_invalid_range(n, weight_range):
    with pytest.raises(InvalidRange):
        random_operator(n, seed=0, weight_range=weight_range)


def test_perturb_leaves_original_untouched():
    op = new_operator([1.0, 2.0, 3.0])
    moved = perturb(op, 4, 0.5)
    np.testing.assert_array_equal(op.c, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(moved.c, [1.0, 2.5, 3.0])


def test_perturb_below_zero_is_rejected():
    with pytest.raises(NonPositiveWeight):
        perturb(new_operator([1.0, 2.0, 3.0]), 0, -1.0)


@given(st.integers(min_value=-1000, max_value=1000))
def test_cyclic_indexing(i):
    op = new_operator([0.5, 1.0, 1.5, 2.0, 2.5])
    assert op.weight(i) == op.weight(i + op.period)
    assert op.amplitude(i) == op.amplitude(i - op.period)
