"""Seed sweeps at the acceptance sizes; run with -m slow."""

import numpy as np
import pytest

from config.settings import BracketKind
from modules.invariants import (
    j_from_i, j_trace, lemma_limit_sequence, limit_decay_ratios, theorem_a_check, theorem_b_check
)
from modules.lattice import random_operator
from modules.poisson import verify_canonical
from modules.spectral import delta_from_monodromy

ACCEPTANCE_GENERA = [1, 2, 3, 5, 10]
SEEDS = range(20)

pytestmark = pytest.mark.slow


@pytest.fixture(params=ACCEPTANCE_GENERA, ids=lambda n: f"N{n}")
def sweep(request):
    return [random_operator(request.param, seed) for seed in SEEDS]


def test_canonical_charts(sweep):
    failures = []
    for seed, op in enumerate(sweep):
        for kind in BracketKind:
            report = verify_canonical(op, kind)
            if report.flipped:
                failures.append((seed, kind.value, report.flipped))
    assert not failures


def test_newton_identities(sweep):
    for op in sweep:
        delta = delta_from_monodromy(op)
        for k in range(1, op.genus + 1):
            expected = j_trace(op, k)
            assert abs(j_from_i(delta, k) - expected) / abs(expected) < 1e-9


def test_theorems(sweep):
    failed = []
    for seed, op in enumerate(sweep):
        delta = delta_from_monodromy(op)
        for kind in BracketKind:
            for report in (theorem_a_check(op, kind, delta=delta), theorem_b_check(delta, kind)):
                if not report.passed:
                    failed.append((seed, report.name, report.max_residual))
    assert not failed


def test_limit_sequence_decays(sweep):
    for op in sweep:
        ratios = limit_decay_ratios(lemma_limit_sequence(delta_from_monodromy(op)))
        assert np.all(np.isfinite(ratios))
        assert np.all(ratios < 1.0)
