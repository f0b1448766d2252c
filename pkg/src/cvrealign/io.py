"""Serialization helpers: fixed float formatting, input hashing, covariance JSON."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .gaussian import CovarianceMatrix, Matrix, as_array


def fmt(x: float) -> str:
    """12 significant digits; scientific notation below 1e-3 in magnitude."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    if abs(x) < 1e-3:
        return f"{x:.11e}"
    return f"{x:.12g}"


def canonical(obj: Any) -> Any:
    """Replace floats (and numpy scalars/arrays) by their fixed-format strings."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _Formatted(fmt(obj))
    return obj


class _Formatted(str):
    """Marks strings produced from floats by :func:`canonical`."""


def inputs_hash(gamma: Matrix, **extra: Any) -> str:
    """Short sha256 digest of a covariance matrix plus any extra parameters."""
    payload = {"entries": as_array(gamma).ravel(), **extra}
    blob = json.dumps(canonical(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dumps(obj: Any) -> str:
    """Deterministic JSON text with floats rendered by :func:`fmt` as JSON numbers."""
    return json.dumps(_numbers(canonical(obj)), sort_keys=True, indent=2)


def _numbers(obj: Any) -> Any:
    # round-trip through the 12-digit text so repeated runs emit identical JSON
    if isinstance(obj, dict):
        return {k: _numbers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_numbers(v) for v in obj]
    if isinstance(obj, _Formatted):
        return str(obj) if obj in ("nan", "inf", "-inf") else float(obj)
    return obj


def read_covariance(path: str | Path) -> CovarianceMatrix:
    with open(path) as fh:
        return CovarianceMatrix.from_dict(json.load(fh))


def write_covariance(gamma: Matrix, path: str | Path) -> None:
    cm = gamma if isinstance(gamma, CovarianceMatrix) else CovarianceMatrix(as_array(gamma))
    Path(path).write_text(dumps(cm.to_dict()) + "\n")
