#!/usr/bin/env python3
"""
Configuration constants for the Volterra spectral toolkit.
"""

# === Tolerance Defaults ===
DEFAULT_EQ_TOL = 1e-9
DEFAULT_FD_STEP = 1e-6
DEFAULT_SEP_TOL = 1e-8
DEFAULT_SHEET_TOL = 1e-6
DEFAULT_FIT_COND_MAX = 1e8

# Keys accepted in a dotenv-format tolerance file
TOLERANCE_FILE_KEYS = {
    "EQ_TOL": "eq_tol",
    "FD_STEP": "fd_step",
    "SEP_TOL": "sep_tol",
    "SHEET_TOL": "sheet_tol",
    "FIT_COND_MAX": "fit_cond_max",
    "TWO_ROUTE_TOL": "two_route_tol",
    "NEWTON_TOL": "newton_tol",
    "FIT_TOL": "fit_tol",
    "ANNULATOR_TOL": "annulator_tol",
    "LENARD_MAGRI_TOL": "lenard_magri_tol",
    "INVOLUTION_TOL": "involution_tol",
    "CANONICAL_TOL": "canonical_tol",
    "THEOREM_TOL": "theorem_tol",
    "DRIFT_TOL": "drift_tol",
    "JACOBI_TOL": "jacobi_tol",
    "LAX_TOL": "lax_tol",
}

# === Operator Generation ===
MIN_PERIOD = 3
DEFAULT_WEIGHT_RANGE = (0.5, 2.0)

# === Asymptotic Expansions ===
# Radii of the two sampling circles, in units of the largest branch-point modulus
PRIMARY_FIT_RADIUS = 2.0
SECONDARY_FIT_RADIUS = 1.5
MIN_FIT_SAMPLES = 64
# Radius of the theorem b) sample circle, same units
DIFFERENTIAL_SAMPLE_RADIUS = 1.5
MIN_DIFFERENTIAL_SAMPLES = 8

# === Finite Differences ===
MAX_SHEET_RETRIES = 5

# === Integration ===
RK4_INITIAL_STEPS = 64
RK4_MAX_HALVINGS = 12
RK4_ENDPOINT_TOL = 1e-8
COMMUTATOR_EPS = 1e-3

# === Verification Thresholds ===
TWO_ROUTE_TOL = 1e-10
NEWTON_TOL = 1e-9
FIT_TOL = 1e-6
ANNULATOR_TOL = 1e-10
LENARD_MAGRI_TOL = 1e-9
INVOLUTION_TOL = 1e-7
CANONICAL_TOL = 1e-5
THEOREM_TOL = 1e-6
DRIFT_TOL = 1e-7
JACOBI_TOL = 1e-12
LAX_TOL = 1e-8
COMMUTATOR_RATIO_RANGE = (4.0, 16.0)
LENARD_MAGRI_GRADIENTS = 10
GENERATING_LAMBDA_SAMPLES = 5

# === Exit Codes ===
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL_FAILURE = 3

# === Suites ===
SUITES = ["spectral", "invariants", "poisson", "theorem", "flows"]
