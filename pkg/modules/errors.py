#!/usr/bin/env python3
"""
Exception hierarchy shared by all modules.

Every error carries the process exit code the CLI reports for it and a short
machine-readable reason.
"""

from config.constants import EXIT_CHECK_FAILED, EXIT_INVALID_INPUT, EXIT_NUMERICAL_FAILURE


class VolterraError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_NUMERICAL_FAILURE

    @property
    def reason(self) -> str:
        return str(self) or self.__class__.__name__


# === Invalid input (exit 2) ===

class InvalidInputError(VolterraError):
    exit_code = EXIT_INVALID_INPUT


class EvenPeriod(InvalidInputError):
    pass


class TooShort(InvalidInputError):
    pass


class NonPositiveWeight(InvalidInputError):
    pass


class InvalidRange(InvalidInputError):
    pass


class OutOfRange(InvalidInputError):
    pass


class LengthMismatch(InvalidInputError):
    pass


class OperatorFileError(InvalidInputError):
    pass


# === Numerical failures (exit 3) ===

class NumericalError(VolterraError):
    exit_code = EXIT_NUMERICAL_FAILURE


class ParityViolation(NumericalError):
    """An even power of lambda survived in the discriminant."""


class RootFindingFailure(NumericalError):
    pass


class DegenerateSpectrum(NumericalError):
    pass


class SingularCurve(NumericalError):
    pass


class BranchAmbiguity(NumericalError):
    pass


class PoleHit(NumericalError):
    pass


class FitIllConditioned(NumericalError):
    pass


class NearBranchPoint(NumericalError):
    pass


class SheetFlip(NumericalError):
    pass


class PositivityLoss(NumericalError):
    pass


class StepLimitExceeded(NumericalError):
    pass


# === Check failures (exit 1) ===

class CanonicityFailure(VolterraError):
    exit_code = EXIT_CHECK_FAILED
