#!/usr/bin/env python3
"""
Pydantic models for every file and report format the CLI reads or writes.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class OperatorFile(BaseModel):
    """Operator file: {"T": <int>, "c": [<floats>]}."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    period: int = Field(..., alias="T")
    c: List[float]

    @model_validator(mode="after")
    def check_period_matches(self) -> "OperatorFile":
        if self.period != len(self.c):
            raise ValueError(f"T={self.period} disagrees with len(c)={len(self.c)}")
        return self


class SpectrumReport(BaseModel):
    I: List[float]
    branch_points_plus: List[List[float]]
    branch_points_minus: List[List[float]]
    nonsingular: bool
    dirichlet: List[float]
    rho: List[List[float]]
    sheet: List[int]


class InvariantsReport(BaseModel):
    J: List[float]
    J_from_I: List[float]
    lnDelta_coeffs: List[float]
    lnRho_coeffs: List[float]


class CheckReport(BaseModel):
    name: str
    max_residual: float
    tolerance: float
    passed: bool = Field(..., serialization_alias="pass")
    detail: Optional[str] = None


class DriftRow(BaseModel):
    name: str
    max_relative_drift: float
    conserved: bool
    required: bool = True


class EvolveSummary(BaseModel):
    flow: int
    t_end: float
    steps: int
    step_error_estimate: float
    drift: List[DriftRow]


class ExpansionTable(BaseModel):
    order: int
    log_coefficient_delta: float
    log_coefficient_rho: float
    lnDelta: List[float]
    lnRho: List[float]
    J: List[float]
