"""Matrix JSON and delimited-text formats shared by the library and CLI."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError


def matrix_to_json(M) -> dict:
    A = np.atleast_2d(np.asarray(M, dtype=complex))
    rows, cols = A.shape
    return {
        "rows": int(rows),
        "cols": int(cols),
        "data": [[float(z.real), float(z.imag)] for z in A.ravel()],
    }


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        data = obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix JSON: {exc}") from exc
    if rows < 1 or cols < 1 or len(data) != rows * cols:
        raise ValidationError(f"matrix JSON has {len(data)} entries, expected {rows}x{cols}")
    try:
        vals = [complex(float(re), float(im)) for re, im in data]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix entry: {exc}") from exc
    A = np.array(vals, dtype=complex).reshape(rows, cols)
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix JSON has non-finite entries")
    return A


def dumps(obj) -> str:
    """Deterministic JSON text."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps(obj))
    return p


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read JSON {path}: {exc}") from exc


def read_matrix(path) -> np.ndarray:
    return matrix_from_json(read_json(path))


def write_matrix(path, M) -> Path:
    return write_json(path, matrix_to_json(M))


def complex_pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def fmt17(x: float) -> str:
    return f"{float(x):.17g}"
