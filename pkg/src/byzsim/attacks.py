"""Malicious update generators and the adversary's strategy selection.

Five attacks: Gaussian noise, label flipping (a data poison applied during
local training), Lie (mean + z * std, statistically plausible), and the two
rule-targeted attacks Fang (-sign perturbation, scale found by halving until
the poisoned vector survives the target rule) and She (per-perturbation
direction, scale found by a bounded bisection that maximizes the aggregate's
deviation from the benign mean).

Lie, Fang and She model colluding clients: every malicious client uploads
the same vector in a round.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist

import numpy as np

from .aggregation import AggregationRule, RuleKind, bulyan_select, krum_select
from .validation import ValidationError, as_update_matrix, check_probability_vector

logger = logging.getLogger("byzsim")

FANG_Z_START = 10.0
FANG_MAX_HALVINGS = 30
FANG_MOVE_THRESHOLD = 1e-3
SHE_Z_MAX = 50.0
SHE_Z_TOL = 1e-3


class AttackKind(str, Enum):
    GAUSSIAN = "gaussian"
    LABEL_FLIP = "label_flip"
    LIE = "lie"
    FANG = "fang"
    SHE = "she"


class Perturbation(str, Enum):
    NEG_SIGN = "neg_sign"
    NEG_STD = "neg_std"
    NEG_UNIT = "neg_unit"


class Visibility(str, Enum):
    WHITE_BOX_STATIC = "white_box_static"
    WHITE_BOX_DYNAMIC = "white_box_dynamic"
    BLACK_BOX = "black_box"


@dataclass(frozen=True)
class AttackSpec:
    """Attack identity plus its knobs; Fang/She must name a target rule."""

    kind: AttackKind
    sigma: float = 0.5
    target_rule: AggregationRule | None = None
    perturbation: Perturbation = Perturbation.NEG_SIGN
    z_override: float | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0", code="bad_attack_params")
        if self.kind in (AttackKind.FANG, AttackKind.SHE) and self.target_rule is None:
            raise ValidationError(
                f"{self.kind.value} attack requires target_rule", code="missing_target_rule"
            )


@dataclass
class AdversaryKnowledge:
    """What the malicious coalition is allowed to see about the server."""

    server_visibility: Visibility
    known_candidate_set: list[AggregationRule] | None = None
    impact_matrix: np.ndarray | None = None  # alpha[i, j]: attack i vs rule j
    attack_distribution: np.ndarray | None = None

    def __post_init__(self):
        if self.server_visibility is not Visibility.BLACK_BOX and not self.known_candidate_set:
            raise ValidationError(
                "white-box knowledge requires the candidate set", code="missing_candidate_set"
            )
        if self.impact_matrix is not None:
            self.impact_matrix = np.asarray(self.impact_matrix, dtype=np.float64)
        if self.attack_distribution is not None:
            self.attack_distribution = check_probability_vector(self.attack_distribution)


def attack_gaussian(
    dimension: int, count: int, sigma: float, rng: np.random.Generator
) -> list[np.ndarray]:
    """count i.i.d. N(0, sigma^2) vectors of the given dimension."""
    if dimension < 1 or count < 1:
        raise ValidationError("dimension and count must be >= 1", code="bad_attack_params")
    if sigma < 0:
        raise ValidationError("sigma must be >= 0", code="bad_attack_params")
    return list(rng.normal(0.0, sigma, size=(count, dimension)))


def attack_label_flip(label: int, num_classes: int) -> int:
    """0-indexed class flip: c -> num_classes - 1 - c (an involution)."""
    if not 0 <= label < num_classes:
        raise ValidationError(f"label {label} out of range", code="bad_label")
    return num_classes - 1 - label


def flip_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValidationError("labels out of range", code="bad_label")
    return num_classes - 1 - labels


def lie_default_z(n_total: int, n_malicious: int) -> float:
    """Default Lie scale: z = Phi^-1(psi) with psi derived from the client
    counts, clamped inside (0, 1)."""
    s = int(np.floor(n_total / 2 + 1)) - n_malicious
    benign = n_total - n_malicious
    psi = (benign - s) / benign
    psi = min(max(psi, 1e-9), 1.0 - 1e-9)
    return NormalDist().inv_cdf(psi)


def attack_lie(
    benign_updates: Sequence[np.ndarray],
    n_total: int,
    n_malicious: int,
    z_override: float | None = None,
) -> np.ndarray:
    """Single colluding vector mean + z * std over the visible benign updates.

    std is the population (divide-by-count) standard deviation per
    coordinate, which is 0 for a single benign update.
    """
    if not 0 < n_malicious < n_total:
        raise ValidationError("need 0 < n_malicious < n_total", code="bad_attack_params")
    matrix = as_update_matrix(benign_updates)
    z = lie_default_z(n_total, n_malicious) if z_override is None else z_override
    return matrix.mean(axis=0) + z * matrix.std(axis=0)


def _selected_by(rule: AggregationRule, combined: list[np.ndarray], n_benign: int) -> bool:
    mal_idx = set(range(n_benign, len(combined)))
    if rule.kind is RuleKind.KRUM:
        return bool(mal_idx & set(krum_select(combined, rule.h, rule.k)))
    return bool(mal_idx & set(bulyan_select(combined, rule.h)))


def fang_scale_search(
    benign_updates: Sequence[np.ndarray],
    target_rule: AggregationRule,
    n_malicious: int,
    z_start: float = FANG_Z_START,
    max_halvings: int = FANG_MAX_HALVINGS,
) -> tuple[float, bool]:
    """Geometric halving from z_start until mean + z*w survives the rule.

    Survival means a malicious copy is among the selected set (Krum/Bulyan),
    or the combined aggregate moved toward w by at least the threshold
    (Median/TrimmedMean); Mean accepts anything.  Returns (z, converged); on
    exhaustion the smallest candidate is kept and converged is False.
    """
    matrix = as_update_matrix(benign_updates)
    rows = list(matrix)
    mean = matrix.mean(axis=0)
    w = -np.sign(mean)
    norm = np.linalg.norm(w)
    if norm == 0:
        return 0.0, True
    if target_rule.kind is RuleKind.MEAN:
        return z_start, True

    if target_rule.kind in (RuleKind.KRUM, RuleKind.BULYAN):
        def survives(z: float) -> bool:
            return _selected_by(target_rule, rows + [mean + z * w] * n_malicious, len(rows))
    else:
        w_unit = w / norm
        benign_aggregate = target_rule.aggregate(rows)
        threshold = FANG_MOVE_THRESHOLD * np.linalg.norm(mean - benign_aggregate)

        def survives(z: float) -> bool:
            combined = rows + [mean + z * w] * n_malicious
            moved = target_rule.aggregate(combined) - benign_aggregate
            return float(moved @ w_unit) >= threshold

    z = z_start
    for _ in range(max_halvings):
        if survives(z):
            return z, True
        z /= 2.0
    return z, False


def attack_fang(
    benign_updates: Sequence[np.ndarray],
    target_rule: AggregationRule,
    n_malicious: int,
) -> list[np.ndarray]:
    """n_malicious copies of mean - z*sign(mean), z from the halving search."""
    if n_malicious < 1:
        raise ValidationError("n_malicious must be >= 1", code="bad_attack_params")
    matrix = as_update_matrix(benign_updates)
    _check_combined_count(target_rule, matrix.shape[0] + n_malicious)
    z, converged = fang_scale_search(benign_updates, target_rule, n_malicious)
    if not converged:
        logger.warning("fang scale search exhausted; using z=%g", z)
    vector = matrix.mean(axis=0) + z * (-np.sign(matrix.mean(axis=0)))
    return [vector.copy() for _ in range(n_malicious)]


def _check_combined_count(rule: AggregationRule, m: int) -> None:
    # Probe the rule's own precondition on a cheap dummy input.
    rule.aggregate([np.zeros(1) for _ in range(m)])


def she_perturbation(benign_matrix: np.ndarray, perturbation: Perturbation) -> np.ndarray:
    mean = benign_matrix.mean(axis=0)
    if perturbation is Perturbation.NEG_SIGN:
        return -np.sign(mean)
    if perturbation is Perturbation.NEG_STD:
        return -benign_matrix.std(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise ValidationError("zero benign mean: unit direction undefined", code="zero_direction")
    return -mean / norm


def she_scale_search(
    benign_updates: Sequence[np.ndarray],
    target_rule: AggregationRule,
    w: np.ndarray,
    n_malicious: int,
    z_max: float = SHE_Z_MAX,
    tol: float = SHE_Z_TOL,
) -> float:
    """Bounded search for the z maximizing ||AGR(V u B(z)) - mean(V)||.

    Selection rules and Mean: bisect for the largest z still accepted.
    Statistic rules: the deviation is non-decreasing and saturates, so
    bisect for the smallest z reaching the saturation level.
    """
    matrix = as_update_matrix(benign_updates)
    mean = matrix.mean(axis=0)
    rows = list(matrix)

    if target_rule.kind in (RuleKind.KRUM, RuleKind.BULYAN):
        def accepted(z: float) -> bool:
            return _selected_by(target_rule, rows + [mean + z * w] * n_malicious, len(rows))

        if accepted(z_max):
            return z_max
        if not accepted(0.0):
            return 0.0
        lo, hi = 0.0, z_max
        while hi - lo > tol:
            mid = (lo + hi) / 2.0
            if accepted(mid):
                lo = mid
            else:
                hi = mid
        return lo

    if target_rule.kind is RuleKind.MEAN:
        return z_max

    def deviation(z: float) -> float:
        combined = rows + [mean + z * w] * n_malicious
        return float(np.linalg.norm(target_rule.aggregate(combined) - mean))

    cap = deviation(z_max)
    floor = cap - max(1e-9 * cap, 1e-12)
    lo, hi = 0.0, z_max
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if deviation(mid) >= floor:
            hi = mid
        else:
            lo = mid
    return hi


def attack_she(
    benign_updates: Sequence[np.ndarray],
    target_rule: AggregationRule,
    perturbation: Perturbation,
    n_malicious: int,
) -> list[np.ndarray]:
    """n_malicious copies of mean + z*w for the chosen perturbation direction."""
    if n_malicious < 1:
        raise ValidationError("n_malicious must be >= 1", code="bad_attack_params")
    matrix = as_update_matrix(benign_updates)
    _check_combined_count(target_rule, matrix.shape[0] + n_malicious)
    w = she_perturbation(matrix, perturbation)
    mean = matrix.mean(axis=0)
    if not np.any(w):
        return [mean.copy() for _ in range(n_malicious)]
    z = she_scale_search(benign_updates, target_rule, w, n_malicious)
    return [(mean + z * w).copy() for _ in range(n_malicious)]


def adversary_select_attack(
    knowledge: AdversaryKnowledge, defense_distribution: Sequence[float]
) -> int:
    """argmax_i of the expected impact sum_j P_d[j] * alpha[i, j]; ties go to
    the lowest attack index."""
    if knowledge.impact_matrix is None:
        raise ValidationError("adversary has no impact matrix", code="missing_impact_matrix")
    p_d = check_probability_vector(defense_distribution)
    matrix = knowledge.impact_matrix
    if matrix.ndim != 2 or matrix.shape[1] != p_d.shape[0]:
        raise ValidationError("impact matrix / distribution shape mismatch", code="shape_mismatch")
    return int(np.argmax(matrix @ p_d))
