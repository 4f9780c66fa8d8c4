#!/usr/bin/env python3
"""
Periodic zero-diagonal difference operators: construction, validation and perturbation.

An operator of odd period T = 2N + 1 acts by
    (L psi)_n = a_{n+1} psi_{n+1} + a_n psi_{n-1},   a_{n+T} = a_n,
and is stored through its weights c_i = a_i**2. Indices are 0-based and cyclic
modulo T everywhere in the package.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from config.constants import DEFAULT_WEIGHT_RANGE, MIN_PERIOD
from modules.errors import EvenPeriod, InvalidRange, NonPositiveWeight, TooShort
from utils.helpers import cyclic

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PeriodicOperator:
    """Immutable odd-period operator given by positive weights c_0..c_{T-1}."""
    c: np.ndarray
    a: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        weights = np.array(self.c, dtype=float)
        weights.setflags(write=False)
        roots = np.sqrt(weights)
        roots.setflags(write=False)
        object.__setattr__(self, "c", weights)
        object.__setattr__(self, "a", roots)

    @property
    def period(self) -> int:
        return int(self.c.size)

    @property
    def genus(self) -> int:
        """N, with T = 2N + 1."""
        return (self.period - 1) // 2

    def weight(self, i: int) -> float:
        """c_i with cyclic indexing."""
        return float(self.c[cyclic(i, self.period)])

    def amplitude(self, i: int) -> float:
        """a_i with cyclic indexing."""
        return float(self.a[cyclic(i, self.period)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PeriodicOperator):
            return NotImplemented
        return np.array_equal(self.c, other.c)

    __hash__ = None

    def __repr__(self) -> str:
        return f"PeriodicOperator(T={self.period}, c={self.c.tolist()})"


def new_operator(c: Sequence[float]) -> PeriodicOperator:
    """Validate weights and build an operator.

    Args:
        c: Weights c_0..c_{T-1}

    Returns:
        PeriodicOperator with a_i = sqrt(c_i)

    Raises:
        TooShort: fewer than three weights
        EvenPeriod: even number of weights
        NonPositiveWeight: some c_i <= 0 (or not finite)
    """
    weights = np.asarray(c, dtype=float).ravel()
    if weights.size < MIN_PERIOD:
        raise TooShort(f"period {weights.size} < {MIN_PERIOD}")
    if weights.size % 2 == 0:
        raise EvenPeriod(f"period {weights.size} is even")
    bad = np.flatnonzero(~np.isfinite(weights) | (weights <= 0))
    if bad.size:
        raise NonPositiveWeight(f"c[{bad[0]}]={weights[bad[0]]} is not positive")
    return PeriodicOperator(weights)


def random_operator(n: int, seed: int,
                    weight_range: Tuple[float, float] = DEFAULT_WEIGHT_RANGE) -> PeriodicOperator:
    """Draw T = 2N+1 weights uniformly from a seeded generator.

    Args:
        n: Genus N >= 1
        seed: Seed of numpy's default generator; equal inputs give equal outputs
        weight_range: (lo, hi) with 0 < lo <= hi

    Returns:
        PeriodicOperator of period 2N+1
    """
    lo, hi = weight_range
    if n < 1:
        raise InvalidRange(f"N={n} must be at least 1")
    if not (lo > 0 and hi >= lo):
        raise InvalidRange(f"weight range ({lo}, {hi}) must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(lo, hi, size=2 * n + 1)
    logger.debug("random operator N=%s seed=%s range=(%s, %s)", n, seed, lo, hi)
    return new_operator(weights)


def perturb(op: PeriodicOperator, i: int, eps: float) -> PeriodicOperator:
    """Copy of op with c_i replaced by c_i + eps; op itself is unchanged."""
    weights = op.c.copy()
    weights[i % op.period] += eps
    return new_operator(weights)
