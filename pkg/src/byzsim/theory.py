"""Evaluable robustness and convergence formulas plus empirical checkers.

Covers the empirical robustness coefficient of an aggregate against the
honest inputs, the sufficient probability-mass condition for a dynamic
defense to stay robust, the momentum-SGD learning-rate choice and error
bound it implies, and the expectation-vs-maximum attack impact comparison.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .validation import ValidationError, as_update_matrix, check_probability_vector


@dataclass(frozen=True)
class RobustnessEstimate:
    """Empirical (h, alpha) measurement of one aggregate.

    ``alpha_hat`` is None when the honest inputs have zero variance but the
    aggregate still deviates (the coefficient is undefined, not infinite).
    """

    alpha_hat: float | None
    inner_product: float
    condition_i_holds: bool


@dataclass(frozen=True)
class TheoryInputs:
    """Constants feeding the convergence formulas."""

    L: float  # smoothness
    G_l2: float  # local gradient variance bound
    G_g2: float  # heterogeneity bound
    K: int  # sampled clients per round
    h_m: int  # max Byzantine per round
    T: int  # rounds
    expected_alpha: float  # E[alpha_i] under the sampling distribution
    F0_gap: float  # F(x0) - F*
    grad0_sq: float  # ||grad F(x0)||^2

    def __post_init__(self):
        values = (self.L, self.G_l2, self.G_g2, self.expected_alpha, self.F0_gap, self.grad0_sq)
        if any(v < 0 for v in values):
            raise ValidationError("theory inputs must be non-negative", code="bad_theory_inputs")
        if self.T < 1:
            raise ValidationError("T must be >= 1", code="bad_theory_inputs")
        if not self.h_m < self.K / 2:
            raise ValidationError("need h_m < K/2", code="bad_theory_inputs")


def empirical_alpha(
    honest_updates: Sequence[np.ndarray], aggregate: np.ndarray
) -> RobustnessEstimate:
    """Measure ||Q - mean||^2 * |N| / sum ||V_i - mean||^2 and <Q, mean>."""
    matrix = as_update_matrix(honest_updates)
    q = np.asarray(aggregate, dtype=np.float64).reshape(-1)
    if q.shape[0] != matrix.shape[1]:
        raise ValidationError("aggregate dimension mismatch", code="dimension_mismatch")
    mean = matrix.mean(axis=0)
    variance_sum = float(((matrix - mean) ** 2).sum())
    deviation = float(((q - mean) ** 2).sum())
    inner = float(q @ mean)
    if variance_sum == 0.0:
        alpha = 0.0 if deviation == 0.0 else None
    else:
        alpha = deviation * matrix.shape[0] / variance_sum
    return RobustnessEstimate(alpha, inner, inner > 0.0)


class Theorem1Result(NamedTuple):
    threshold: float
    robust: bool
    expected_inner: float


def theorem1_check(inner_products: Sequence[float], probs: Sequence[float]) -> Theorem1Result:
    """Sufficient condition for a rule-sampling defense to stay robust.

    Rules whose aggregate has non-positive inner product with the honest
    mean form the broken set; the mass on the rest must exceed
    sup|broken| / (sup|broken| + inf(intact)).
    """
    ips = np.asarray(inner_products, dtype=np.float64).reshape(-1)
    p = check_probability_vector(probs)
    if ips.shape != p.shape:
        raise ValidationError("inner products / P length mismatch", code="shape_mismatch")
    broken = ips <= 0.0
    expected_inner = float(p @ ips)
    if not broken.any():
        return Theorem1Result(0.0, True, expected_inner)
    if broken.all():
        return Theorem1Result(1.0, False, expected_inner)
    sup_broken = float(np.abs(ips[broken]).max())
    inf_intact = float(ips[~broken].min())
    threshold = sup_broken / (sup_broken + inf_intact)
    robust = float(p[~broken].sum()) > threshold
    if robust:
        # The condition is sufficient for a positive expected inner product.
        assert expected_inner > 0.0
    return Theorem1Result(threshold, robust, expected_inner)


class LearningRateChoice(NamedTuple):
    eta: float
    beta: float


def _rate_numerator(c: TheoryInputs) -> float:
    return 32.0 * c.L * c.F0_gap + (6.0 + 10.0 / (c.K - c.h_m)) * c.G_l2 + 7.0 * c.G_g2


def _rate_noise(c: TheoryInputs) -> float:
    return 80.0 * c.L * (c.G_l2 / (c.K - c.h_m) + c.G_g2) + 240.0 * c.L * c.expected_alpha * c.G_l2


def theorem2_eta(inputs: TheoryInputs) -> LearningRateChoice:
    """Learning rate and momentum parameter prescribed by the analysis."""
    if inputs.L <= 0:
        raise ValidationError("L must be > 0", code="bad_theory_inputs")
    cap = 1.0 / (8.0 * inputs.L)
    noise = _rate_noise(inputs)
    if noise == 0.0:
        eta = cap
    else:
        eta = min(math.sqrt(_rate_numerator(inputs) / (8.0 * inputs.L * inputs.T * noise)), cap)
    beta = 1.0 - 8.0 * inputs.L * eta
    assert 0.0 <= beta < 1.0
    return LearningRateChoice(eta, beta)


def theorem2_bound(inputs: TheoryInputs) -> float:
    """Mean-squared-gradient error bound for T rounds of the defense."""
    if inputs.L <= 0:
        raise ValidationError("L must be > 0", code="bad_theory_inputs")
    c = inputs
    t = float(c.T)
    transient = (
        32.0 * c.L * c.F0_gap / t
        + (6.0 / (c.K - c.h_m) * c.G_l2 + 3.0 * c.G_g2) / t
        + 2.0 * c.grad0_sq / t
    )
    radius = 15.0 * c.expected_alpha * c.G_g2
    sqrt_term = math.sqrt(_rate_numerator(c)) * math.sqrt(
        (640.0 * c.L**2 * (c.G_l2 / (c.K - c.h_m) + c.G_g2)
         + 1920.0 * c.L**2 * c.expected_alpha * c.G_l2) / t
    )
    return transient + radius + sqrt_term


def neighborhood_radius(inputs: TheoryInputs) -> float:
    """The T -> infinity limit of the error bound."""
    return 15.0 * inputs.expected_alpha * inputs.G_g2


class ImpactComparison(NamedTuple):
    expected: float
    worst_case: float


def impact_comparison(
    alpha_matrix: Sequence[Sequence[float]],
    p_d: Sequence[float],
    p_a: Sequence[float],
) -> ImpactComparison:
    """Expected impact under (P_a, P_d) vs the best single attack's impact."""
    matrix = np.asarray(alpha_matrix, dtype=np.float64)
    pd = check_probability_vector(p_d)
    pa = check_probability_vector(p_a)
    if matrix.ndim != 2 or matrix.shape != (pa.shape[0], pd.shape[0]):
        raise ValidationError("matrix / distribution shape mismatch", code="shape_mismatch")
    per_attack = matrix @ pd
    expected = float(pa @ per_attack)
    worst = float(per_attack.max())
    assert expected <= worst + 1e-12
    return ImpactComparison(expected, worst)


def estimate_smoothness(
    points: Sequence[np.ndarray], gradients: Sequence[np.ndarray]
) -> float:
    """Secant estimate of the gradient Lipschitz constant over point pairs."""
    if len(points) != len(gradients) or len(points) < 2:
        raise ValidationError("need >= 2 matched points/gradients", code="bad_theory_inputs")
    best = 0.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            dx = np.linalg.norm(np.asarray(points[i]) - np.asarray(points[j]))
            if dx == 0:
                continue
            dg = np.linalg.norm(np.asarray(gradients[i]) - np.asarray(gradients[j]))
            best = max(best, float(dg / dx))
    return best


def theory_report(inputs: TheoryInputs) -> str:
    """Human-readable block summarizing the convergence prescription."""
    rate = theorem2_eta(inputs)
    lines = [
        "theory report",
        f"  L={inputs.L:.6g}  G_l2={inputs.G_l2:.6g}  G_g2={inputs.G_g2:.6g}",
        f"  K={inputs.K}  h_m={inputs.h_m}  T={inputs.T}  E[alpha]={inputs.expected_alpha:.6g}",
        f"  prescribed eta={rate.eta:.6g}  beta={rate.beta:.6g}",
        f"  error bound={theorem2_bound(inputs):.6g}",
        f"  neighborhood radius={neighborhood_radius(inputs):.6g}",
    ]
    return "\n".join(lines)
