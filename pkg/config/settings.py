#!/usr/bin/env python3
"""
Configuration objects: numerical tolerances and Poisson bracket kinds.
"""

import sys
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Dict, Optional

from dotenv import dotenv_values

from modules.errors import InvalidInputError, OperatorFileError
from config.constants import (
    DEFAULT_EQ_TOL, DEFAULT_FD_STEP, DEFAULT_SEP_TOL, DEFAULT_SHEET_TOL,
    DEFAULT_FIT_COND_MAX, TOLERANCE_FILE_KEYS, TWO_ROUTE_TOL, NEWTON_TOL, FIT_TOL, ANNULATOR_TOL,
    LENARD_MAGRI_TOL, INVOLUTION_TOL, CANONICAL_TOL, THEOREM_TOL, DRIFT_TOL, JACOBI_TOL, LAX_TOL
)


@dataclass(frozen=True)
class ToleranceConfig:
    """Tolerances used by identity checks, finite differences and root separation.

    The *_tol fields after fit_cond_max are the pass thresholds of the verify
    suites; scaled checks multiply them by the scale their report states.
    """
    eq_tol: float = DEFAULT_EQ_TOL
    fd_step: float = DEFAULT_FD_STEP
    sep_tol: float = DEFAULT_SEP_TOL
    sheet_tol: float = DEFAULT_SHEET_TOL
    fit_cond_max: float = DEFAULT_FIT_COND_MAX
    two_route_tol: float = TWO_ROUTE_TOL
    newton_tol: float = NEWTON_TOL
    fit_tol: float = FIT_TOL
    annulator_tol: float = ANNULATOR_TOL
    lenard_magri_tol: float = LENARD_MAGRI_TOL
    involution_tol: float = INVOLUTION_TOL
    canonical_tol: float = CANONICAL_TOL
    theorem_tol: float = THEOREM_TOL
    drift_tol: float = DRIFT_TOL
    jacobi_tol: float = JACOBI_TOL
    lax_tol: float = LAX_TOL

    def __post_init__(self):
        for item in fields(self):
            value = getattr(self, item.name)
            if not value > 0:
                raise InvalidInputError(f"{item.name} must be strictly positive, got {value}")
        if not self.fd_step ** 2 > sys.float_info.epsilon:
            raise InvalidInputError(
                f"fd_step={self.fd_step} too small: fd_step**2 must exceed machine epsilon"
            )

    def with_eq_tol(self, eq_tol: Optional[float]) -> "ToleranceConfig":
        """Return a copy with eq_tol overridden (unchanged when eq_tol is None)."""
        if eq_tol is None:
            return self
        return replace(self, eq_tol=eq_tol)


class BracketKind(Enum):
    """The two compatible Poisson brackets on the space of weights.

    The tag determines the annulator and the momentum exponent m in
    p_k = 2 ln rho_k / lambda_k**m.
    """
    QUADRATIC = "quadratic"
    CUBIC = "cubic"

    @property
    def annulator(self) -> str:
        return "I_0" if self is BracketKind.QUADRATIC else "I_N"

    @property
    def momentum_exponent(self) -> int:
        return 1 if self is BracketKind.QUADRATIC else 3

    def annulator_index(self, n: int) -> int:
        """Index of the annulator among I_0..I_N."""
        return 0 if self is BracketKind.QUADRATIC else n


def load_tolerance_config(filepath: Optional[str] = None) -> ToleranceConfig:
    """Load tolerance overrides from a dotenv-format file.

    Only the file is read; the process environment is never consulted.

    Args:
        filepath: Path to the settings file, or None for defaults

    Returns:
        ToleranceConfig with the file's overrides applied
    """
    if filepath is None:
        return ToleranceConfig()

    try:
        with open(filepath, "r", encoding="utf-8") as stream:
            values = dotenv_values(stream=stream)
    except OSError as e:
        raise OperatorFileError(f"cannot read config {filepath}: {e}") from e

    overrides: Dict[str, float] = {}
    for key, raw in values.items():
        if key not in TOLERANCE_FILE_KEYS:
            raise InvalidInputError(f"unknown config key {key}")
        try:
            overrides[TOLERANCE_FILE_KEYS[key]] = float(raw)
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"config key {key} is not a number: {raw!r}") from e

    return ToleranceConfig(**overrides)
