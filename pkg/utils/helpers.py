#!/usr/bin/env python3
"""
General numeric utility functions and helpers.
"""

from typing import List, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment


def cyclic(i: int, period: int) -> int:
    """Reduce an index to its residue modulo the period.

    Args:
        i: Any integer index
        period: Lattice period T

    Returns:
        Index in range(period)
    """
    return i % period


def relative_error(value: complex, reference: complex, floor: float = 1e-300) -> float:
    """Relative error |value - reference| / |reference|, floored to avoid 0/0.

    Args:
        value: Computed value
        reference: Trusted value
        floor: Lower bound for the denominator

    Returns:
        Relative error as float
    """
    return float(abs(value - reference) / max(abs(reference), floor))


def max_relative_error(values: Sequence[complex], references: Sequence[complex]) -> float:
    """Largest componentwise relative error between two equally long vectors."""
    values = np.asarray(values)
    references = np.asarray(references)
    if values.shape != references.shape:
        raise ValueError(f"shape mismatch {values.shape} vs {references.shape}")
    if values.size == 0:
        return 0.0
    denom = np.maximum(np.abs(references), 1e-300)
    return float(np.max(np.abs(values - references) / denom))


def multiset_distance(first: Sequence[complex], second: Sequence[complex]) -> float:
    """Bottleneck distance between two equally sized multisets of complex numbers.

    The optimal pairing minimizing the total distance is found by the
    Hungarian algorithm; the largest paired distance is returned.
    """
    a = np.asarray(first, dtype=complex)
    b = np.asarray(second, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"multiset sizes differ: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))


def min_pairwise_distance(points: Sequence[complex]) -> float:
    """Smallest distance between two distinct entries of a list (inf if fewer than two)."""
    z = np.asarray(points, dtype=complex)
    if z.size < 2:
        return float("inf")
    dist = np.abs(z[:, None] - z[None, :])
    dist[np.diag_indices_from(dist)] = np.inf
    return float(np.min(dist))


def complex_pairs(values: Sequence[complex]) -> List[List[float]]:
    """Convert complex numbers to [re, im] pairs for JSON output."""
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def unit_vector(size: int, i: int) -> np.ndarray:
    """Coordinate vector e_i of the given length."""
    e = np.zeros(size)
    e[i] = 1.0
    return e
