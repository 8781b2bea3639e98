"""Weighted mean and robust aggregation rules over flat update vectors.

All rules consume a list of equal-dimension 1-D float vectors (one per
client) and return a single aggregated vector.  Everything is computed in
float64 with no internal tolerances; ties are broken by lowest input index
so results are reproducible.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .validation import AggregationError, ValidationError, as_update_matrix, as_weight_vector


class RuleKind(str, Enum):
    MEAN = "mean"
    KRUM = "krum"
    MEDIAN = "median"
    TRIMMED_MEAN = "trimmed_mean"
    BULYAN = "bulyan"


@dataclass(frozen=True)
class AggregationRule:
    """One element of the server's candidate set.

    ``h`` is the tolerated Byzantine count (Krum/Bulyan), ``k`` the Krum
    selection count, ``beta_trim`` the per-side trim fraction.
    """

    kind: RuleKind
    h: int = 0
    k: int = 10
    beta_trim: float = 0.2

    def __post_init__(self):
        if self.h < 0:
            raise ValidationError("h must be >= 0", code="bad_rule_params")
        if self.k < 1:
            raise ValidationError("k must be >= 1", code="bad_rule_params")
        if not 0.0 <= self.beta_trim < 0.5:
            raise ValidationError("beta_trim must be in [0, 0.5)", code="bad_rule_params")

    def label(self) -> str:
        if self.kind is RuleKind.KRUM:
            return f"krum(h={self.h},k={self.k})"
        if self.kind is RuleKind.BULYAN:
            return f"bulyan(h={self.h})"
        if self.kind is RuleKind.TRIMMED_MEAN:
            return f"trimmed_mean(beta={self.beta_trim})"
        return self.kind.value

    def aggregate(
        self,
        updates: Sequence[np.ndarray],
        weights: Sequence[float] | None = None,
    ) -> np.ndarray:
        """Apply this rule; ``weights`` are honoured only by the mean rule."""
        if self.kind is RuleKind.MEAN:
            if weights is None:
                weights = np.ones(len(updates))
            return agg_mean(updates, weights)
        if self.kind is RuleKind.KRUM:
            return agg_krum(updates, self.h, self.k)
        if self.kind is RuleKind.MEDIAN:
            return agg_median(updates)
        if self.kind is RuleKind.TRIMMED_MEAN:
            return agg_trimmed_mean(updates, self.beta_trim)
        return agg_bulyan(updates, self.h)


def _anchored_mean(matrix: np.ndarray, probs: np.ndarray | None = None) -> np.ndarray:
    # Averaging deviations from the first row keeps identical inputs an
    # exact fixed point (sum(p_i * 0) == 0 regardless of rounding).
    anchor = matrix[0]
    if probs is None:
        return anchor + (matrix - anchor).mean(axis=0)
    return anchor + probs @ (matrix - anchor)


def agg_mean(updates: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Weighted mean: sum_i (w_i / sum_j w_j) * V_i, coordinate-wise."""
    matrix = as_update_matrix(updates)
    w = as_weight_vector(weights, matrix.shape[0])
    return _anchored_mean(matrix, w / w.sum())


def _pairwise_sq_dists(matrix: np.ndarray) -> np.ndarray:
    diff = matrix[:, None, :] - matrix[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _neighbor_scores(sq_dists: np.ndarray, h: int) -> np.ndarray:
    """Per-vector sum of squared distances to its m-h-2 nearest neighbors.

    The neighbor count is clamped to [0, m-1]; Bulyan's late inner passes
    legitimately reach counts <= 0, where every score is 0.
    """
    m = sq_dists.shape[0]
    q = min(max(m - h - 2, 0), m - 1)
    if q == 0:
        return np.zeros(m)
    sorted_rows = np.sort(sq_dists, axis=1)
    # Column 0 is the self-distance (0); neighbors are columns 1..q.
    return sorted_rows[:, 1 : q + 1].sum(axis=1)


def krum_select(updates: Sequence[np.ndarray], h: int, k: int) -> list[int]:
    """Indices of the k updates with smallest Krum scores, ascending score.

    Score ties are broken by lowest input index.
    """
    matrix = as_update_matrix(updates)
    m = matrix.shape[0]
    if h < 0:
        raise AggregationError("h must be >= 0", code="bad_rule_params")
    if m < h + 3:
        raise AggregationError(
            f"krum needs at least h+3={h + 3} updates, got {m}", code="too_few_updates"
        )
    if not 1 <= k <= m:
        raise AggregationError(f"k={k} out of range for {m} updates", code="bad_rule_params")
    scores = _neighbor_scores(_pairwise_sq_dists(matrix), h)
    order = np.argsort(scores, kind="stable")
    return [int(i) for i in order[:k]]


def agg_krum(updates: Sequence[np.ndarray], h: int, k: int) -> np.ndarray:
    """Unweighted mean of the k updates with smallest Krum scores."""
    selected = krum_select(updates, h, k)
    matrix = as_update_matrix(updates)
    return _anchored_mean(matrix[selected])


def agg_median(updates: Sequence[np.ndarray]) -> np.ndarray:
    """Coordinate-wise median; even counts average the two middle values."""
    matrix = as_update_matrix(updates)
    return np.median(matrix, axis=0)


def agg_trimmed_mean(updates: Sequence[np.ndarray], beta_trim: float) -> np.ndarray:
    """Per coordinate, drop the floor(beta_trim*m) largest and smallest
    values and average the remainder."""
    if not 0.0 <= beta_trim < 0.5:
        raise AggregationError("beta_trim must be in [0, 0.5)", code="bad_rule_params")
    matrix = as_update_matrix(updates)
    m = matrix.shape[0]
    t = int(np.floor(beta_trim * m))
    if 2 * t >= m:
        raise AggregationError(
            f"trimming {t} per side leaves nothing of {m} updates", code="over_trim"
        )
    kept = np.sort(matrix, axis=0)[t : m - t]
    return _anchored_mean(kept)


def bulyan_select(updates: Sequence[np.ndarray], h: int) -> list[int]:
    """Selection set built by m-2h repeated Krum picks (k=1, no replacement)."""
    matrix = as_update_matrix(updates)
    m = matrix.shape[0]
    _check_bulyan_count(m, h)
    sq_dists = _pairwise_sq_dists(matrix)
    remaining = list(range(m))
    selected: list[int] = []
    for _ in range(m - 2 * h):
        sub = sq_dists[np.ix_(remaining, remaining)]
        scores = _neighbor_scores(sub, h)
        best = int(np.argmin(scores))  # argmin keeps the lowest index on ties
        selected.append(remaining.pop(best))
    return selected


def _check_bulyan_count(m: int, h: int) -> None:
    if h < 0:
        raise AggregationError("h must be >= 0", code="bad_rule_params")
    if m - 4 * h < 1 or m < h + 3:
        raise AggregationError(
            f"bulyan needs m-4h >= 1 and m >= h+3, got m={m}, h={h}",
            code="too_few_updates",
        )


def agg_bulyan(updates: Sequence[np.ndarray], h: int) -> np.ndarray:
    """Two-stage Bulyan: Krum selection set, then per coordinate the mean of
    the m-4h values closest to the selection set's coordinate-wise median.

    Closeness ties are broken by lower input index.
    """
    selected = bulyan_select(updates, h)
    matrix = as_update_matrix(updates)
    m = matrix.shape[0]
    keep = m - 4 * h
    sel = matrix[selected]
    med = np.median(sel, axis=0)
    closeness = np.abs(sel - med)
    # Lexsort per coordinate: primary key closeness, secondary key original
    # input index of the selected row.
    sel_idx = np.asarray(selected)
    out = np.empty(matrix.shape[1])
    for j in range(matrix.shape[1]):
        order = np.lexsort((sel_idx, closeness[:, j]))[:keep]
        col = sel[order, j]
        out[j] = col[0] + (col - col[0]).mean()
    return out
