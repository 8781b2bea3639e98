"""Server-side defense strategies over a candidate set of aggregation rules.

Static pins one rule; the dynamic modes sample a rule per round.  The
weighted black-box mode aggregates with every candidate rule, scores each
result by its (negatively clipped) cosine similarity to the server's trusted
root update, and samples among the results proportionally.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .aggregation import AggregationRule
from .validation import ValidationError, check_probability_vector


class DefenseMode(str, Enum):
    STATIC = "static"
    WHITE_BOX_DYNAMIC = "white_box_dynamic"
    BLACK_BOX_UNIFORM = "black_box_uniform"
    BLACK_BOX_WEIGHTED = "black_box_weighted"


@dataclass
class DefenseStrategy:
    """Candidate rule set plus the sampling distribution over it.

    ``distribution`` is a point mass for Static, uniform for the dynamic
    modes, and is refreshed each round in weighted mode.
    """

    mode: DefenseMode
    candidate_set: list[AggregationRule]
    static_index: int = 0
    distribution: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.candidate_set:
            raise ValidationError("candidate set must be non-empty", code="empty_candidate_set")
        m = len(self.candidate_set)
        if self.mode is DefenseMode.STATIC:
            if not 0 <= self.static_index < m:
                raise ValidationError("static_index out of range", code="bad_static_index")
            self.distribution = np.zeros(m)
            self.distribution[self.static_index] = 1.0
        else:
            self.distribution = np.full(m, 1.0 / m)

    @property
    def size(self) -> int:
        return len(self.candidate_set)


@dataclass
class RoundAggregationRecord:
    """What the server did in one round's aggregation step."""

    rule_index: int
    chosen_aggregate: np.ndarray
    probabilities_used: np.ndarray
    candidate_results: list[np.ndarray] | None = None


def sample_rule(strategy: DefenseStrategy, rng: np.random.Generator) -> int:
    """Draw a rule index from the strategy's distribution."""
    if strategy.mode is DefenseMode.STATIC:
        return strategy.static_index
    p = check_probability_vector(strategy.distribution)
    return int(rng.choice(strategy.size, p=p))


def weighted_probs(
    candidate_results: Sequence[np.ndarray], trusted_update: np.ndarray
) -> np.ndarray:
    """p_j proportional to max(0, cosine(result_j, trusted_update)).

    Falls back to uniform when every clipped similarity is zero.
    """
    trusted = np.asarray(trusted_update, dtype=np.float64).reshape(-1)
    t_norm = np.linalg.norm(trusted)
    if t_norm == 0:
        raise ValidationError("trusted update is the zero vector", code="zero_trusted_update")
    sims = np.empty(len(candidate_results))
    for j, result in enumerate(candidate_results):
        r = np.asarray(result, dtype=np.float64).reshape(-1)
        if r.shape != trusted.shape:
            raise ValidationError("candidate/trusted dimension mismatch", code="dimension_mismatch")
        r_norm = np.linalg.norm(r)
        sims[j] = 0.0 if r_norm == 0 else max(0.0, float(r @ trusted) / (r_norm * t_norm))
    total = sims.sum()
    if total == 0:
        return np.full(len(sims), 1.0 / len(sims))
    return sims / total


def defend_round(
    strategy: DefenseStrategy,
    received_updates: Sequence[np.ndarray],
    weights: Sequence[float],
    trusted_update: np.ndarray | None,
    rng: np.random.Generator,
) -> RoundAggregationRecord:
    """Run one round of server-side aggregation under the strategy.

    Rule precondition violations propagate as AggregationError so the caller
    can abort the round.
    """
    if strategy.mode is DefenseMode.BLACK_BOX_WEIGHTED:
        if trusted_update is None:
            raise ValidationError(
                "weighted mode needs a trusted update", code="missing_trusted_update"
            )
        results = [
            rule.aggregate(received_updates, weights) for rule in strategy.candidate_set
        ]
        probs = weighted_probs(results, trusted_update)
        strategy.distribution = probs
        idx = int(rng.choice(strategy.size, p=probs))
        return RoundAggregationRecord(idx, results[idx], probs, candidate_results=results)
    idx = sample_rule(strategy, rng)
    chosen = strategy.candidate_set[idx].aggregate(received_updates, weights)
    return RoundAggregationRecord(idx, chosen, strategy.distribution.copy())
