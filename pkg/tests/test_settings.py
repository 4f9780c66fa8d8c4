"""Tests for tolerance configuration, file helpers and report schemas."""

import json

import pytest

from config.settings import BracketKind, ToleranceConfig, load_tolerance_config
from modules.errors import InvalidInputError, OperatorFileError
from utils.file_ops import export_rows_to_csv, load_json_file, load_operator_file, save_operator_file
from utils.helpers import multiset_distance, relative_error


def test_default_tolerances():
    tol = ToleranceConfig()
    assert (tol.eq_tol, tol.fd_step, tol.sep_tol) == (1e-9, 1e-6, 1e-8)


def test_eq_tol_override():
    tol = ToleranceConfig().with_eq_tol(1e-6)
    assert tol.eq_tol == 1e-6
    assert ToleranceConfig().with_eq_tol(None) == ToleranceConfig()


@pytest.mark.parametrize("kwargs", [{"eq_tol": 0.0}, {"sep_tol": -1.0}, {"fd_step": 1e-9}])
def test_invalid_tolerances(kwargs):
    with pytest.raises(InvalidInputError):
        ToleranceConfig(**kwargs)


def test_load_tolerance_file(tmp_path):
    path = tmp_path / "tol.env"
    path.write_text("EQ_TOL=1e-7\nFD_STEP=1e-5\n")
    tol = load_tolerance_config(str(path))
    assert tol.eq_tol == 1e-7
    assert tol.fd_step == 1e-5
    assert tol.sep_tol == ToleranceConfig().sep_tol


def test_load_tolerance_file_bad_value(tmp_path):
    path = tmp_path / "tol.env"
    path.write_text("SEP_TOL=tiny\n")
    with pytest.raises(InvalidInputError):
        load_tolerance_config(str(path))


def test_load_tolerance_missing_file(tmp_path):
    with pytest.raises(OperatorFileError):
        load_tolerance_config(str(tmp_path / "absent.env"))


def test_bracket_kind_fields():
    assert BracketKind.QUADRATIC.momentum_exponent == 1
    assert BracketKind.CUBIC.momentum_exponent == 3
    assert BracketKind.QUADRATIC.annulator_index(4) == 0
    assert BracketKind.CUBIC.annulator_index(4) == 4
    assert BracketKind.CUBIC.annulator == "I_N"


def test_operator_file_round_trip(tmp_path):
    path = tmp_path / "op.json"
    weights = [0.1 + 0.2, 1.0 / 3.0, 2.0]
    save_operator_file(str(path), weights)
    assert load_operator_file(str(path)).c == weights
    assert json.loads(path.read_text()) == {"T": 3, "c": weights}


def test_operator_file_rejects_extra_keys(tmp_path):
    path = tmp_path / "op.json"
    path.write_text(json.dumps({"T": 3, "c": [1, 1, 1], "note": "x"}))
    with pytest.raises(OperatorFileError):
        load_operator_file(str(path))


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(OperatorFileError):
        load_json_file(str(path))


def test_csv_uses_round_trip_floats():
    text = export_rows_to_csv([[0.0, 0.1 + 0.2]], ["t", "c_1"])
    assert text == "t,c_1\n0.0,0.30000000000000004\n"


def test_helpers():
    assert relative_error(1.1, 1.0) == pytest.approx(0.1)
    assert multiset_distance([1.0, 2.0, 3.0], [3.0, 1.0, 2.0 + 1e-3]) == pytest.approx(1e-3)


def test_load_check_thresholds(tmp_path):
    path = tmp_path / "tol.env"
    path.write_text("FIT_TOL=1e-4\nCANONICAL_TOL=1e-3\nDRIFT_TOL=5e-6\n")
    tol = load_tolerance_config(str(path))
    assert (tol.fit_tol, tol.canonical_tol, tol.drift_tol) == (1e-4, 1e-3, 5e-6)
    assert tol.newton_tol == ToleranceConfig().newton_tol


def test_check_thresholds_must_be_positive():
    with pytest.raises(InvalidInputError):
        ToleranceConfig(lax_tol=0.0)
