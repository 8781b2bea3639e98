"""Shared input validation and error types.

Every rejected input carries a stable machine-readable ``code`` so callers
(and tests) can distinguish failure modes without parsing messages.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np


class SimulationError(Exception):
    """Base error; ``code`` identifies the failure mode."""

    def __init__(self, message: str, code: str):
        super().__init__(message)
        self.code = code


class ValidationError(SimulationError):
    """Invalid argument to an operation."""


class AggregationError(SimulationError):
    """Aggregation preconditions violated."""


class ConfigError(SimulationError):
    """Invalid experiment configuration; message carries the field path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}", code="config")
        self.field_path = field_path


def as_update_matrix(updates: Sequence[np.ndarray]) -> np.ndarray:
    """Stack update vectors into an (m, d) float64 matrix, validating shape.

    Rejects empty input (code ``empty_input``), mismatched dimensions
    (``dimension_mismatch``) and non-finite entries (``not_finite``).
    """
    if len(updates) == 0:
        raise AggregationError("no updates to aggregate", code="empty_input")
    rows = [np.asarray(u, dtype=np.float64).reshape(-1) for u in updates]
    d = rows[0].shape[0]
    for i, row in enumerate(rows):
        if row.shape[0] != d:
            raise AggregationError(
                f"update {i} has dimension {row.shape[0]}, expected {d}",
                code="dimension_mismatch",
            )
    matrix = np.stack(rows)
    if not np.all(np.isfinite(matrix)):
        raise AggregationError("updates contain NaN/Inf entries", code="not_finite")
    return matrix


def as_weight_vector(weights: Sequence[float], n: int) -> np.ndarray:
    """Validate aggregation weights: length n, non-negative, positive sum."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n:
        raise AggregationError(
            f"{w.shape[0]} weights for {n} updates", code="length_mismatch"
        )
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise AggregationError("weights must be finite and non-negative", code="bad_weights")
    if w.sum() <= 0:
        raise AggregationError("weights sum to zero", code="zero_weights")
    return w


def check_probability_vector(p: Sequence[float], *, atol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector: non-negative, sums to 1 within atol."""
    vec = np.asarray(p, dtype=np.float64).reshape(-1)
    if vec.size == 0:
        raise ValidationError("empty probability vector", code="empty_distribution")
    if not np.all(np.isfinite(vec)) or np.any(vec < 0):
        raise ValidationError("probabilities must be finite and >= 0", code="bad_distribution")
    if abs(vec.sum() - 1.0) > atol:
        raise ValidationError(
            f"probabilities sum to {vec.sum()!r}, expected 1", code="bad_distribution"
        )
    return vec
