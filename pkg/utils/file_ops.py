#!/usr/bin/env python3
"""
File operations utilities for operator files, JSON reports and CSV trajectories.
"""

import csv
import io
import json
from typing import Any, List, Sequence

from pydantic import ValidationError

from modules.errors import OperatorFileError
from utils.schemas import OperatorFile


def load_json_file(filepath: str) -> Any:
    """Load data from a JSON file with error handling.

    Args:
        filepath: Path to the JSON file

    Returns:
        The decoded JSON document

    Raises:
        OperatorFileError: if the file is missing, unreadable or not JSON
    """
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise OperatorFileError(f"{filepath} is not valid JSON: {e}") from e
    except (FileNotFoundError, PermissionError, OSError) as e:
        raise OperatorFileError(f"file access error loading {filepath}: {e}") from e


def dump_json(data: Any) -> str:
    """Serialize to the canonical text form used by every writer.

    Floats use Python's shortest round-trip repr, so reading the text back
    reproduces every value bit for bit.
    """
    return json.dumps(data, indent=2, sort_keys=False) + "\n"


def save_json_file(filepath: str, data: Any) -> None:
    """Save data to a JSON file with error handling.

    Args:
        filepath: Path to the JSON file
        data: Data to save

    Raises:
        OperatorFileError: if the file cannot be written
    """
    try:
        with open(filepath, 'w', encoding='utf-8') as f:
            f.write(dump_json(data))
    except (PermissionError, OSError) as e:
        raise OperatorFileError(f"file access error saving {filepath}: {e}") from e
    except (TypeError, ValueError) as e:
        raise OperatorFileError(f"data serialization error: {e}") from e


def load_operator_file(filepath: str) -> OperatorFile:
    """Read and validate an operator file.

    Args:
        filepath: Path to a {"T": ..., "c": [...]} file

    Returns:
        Validated OperatorFile model (T agrees with len(c))
    """
    raw = load_json_file(filepath)
    try:
        return OperatorFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise OperatorFileError(f"{filepath}: {first.get('msg', 'invalid operator file')}") from e


def save_operator_file(filepath: str, weights: Sequence[float]) -> None:
    """Write an operator file for the given weights."""
    model = OperatorFile(T=len(weights), c=[float(w) for w in weights])
    save_json_file(filepath, model.model_dump(by_alias=True))


def export_rows_to_csv(rows: Sequence[Sequence[float]], headers: List[str]) -> str:
    """Export numeric rows to CSV text.

    Args:
        rows: Sequence of equally long numeric rows
        headers: Column headers

    Returns:
        CSV string
    """
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return output.getvalue()


def save_text_file(filepath: str, text: str) -> None:
    """Write text to a file, mapping I/O failures to OperatorFileError."""
    try:
        with open(filepath, 'w', encoding='utf-8') as f:
            f.write(text)
    except (PermissionError, OSError) as e:
        raise OperatorFileError(f"file access error saving {filepath}: {e}") from e
