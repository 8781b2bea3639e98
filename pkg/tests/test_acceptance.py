"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The attack/defense grids
(criteria 2 and 3) train 5-seed medians at desk scale and take several
minutes; everything else is fast.
"""

import json
import math
import time

import numpy as np
import pytest

from byzsim.aggregation import agg_bulyan, agg_krum, agg_median, agg_trimmed_mean
from byzsim.config import config_from_dict
from byzsim.learning import Architecture, Model, ModelSpec, gradient, synth_dataset
from byzsim.logio import write_log
from byzsim.simulation import run_experiment
from byzsim.theory import TheoryInputs, impact_comparison, theorem1_check, theorem2_bound, theorem2_eta

from oracles import oracle_bulyan, oracle_krum, oracle_median, oracle_trimmed_mean

SEEDS = (1, 2, 3, 4, 5)
TASK = {
    "n_clients": 200,
    "sample_ratio": 0.2,
    "dataset": {"num_classes": 10, "samples_per_client": 30, "test_samples": 2000,
                "feature_dim": 16, "class_separation": 4.0, "concentration": 0.5,
                "root_size": 200},
    "model": {"arch": "mlp", "hidden_width": 32},
    "eta": 0.5,
    "beta": 1.0,
}
RULE_KINDS = ("krum", "median", "trimmed_mean", "bulyan")


def report(criterion: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    return ok


def run_impact(seed: int, rounds: int, attack: dict | None, defense: dict) -> float:
    doc = json.loads(json.dumps(TASK))
    doc.update({"seed": seed, "rounds": rounds, "defense": defense})
    if attack is not None:
        doc["attack"] = attack
        doc["malicious_fraction"] = 0.1
    return run_experiment(config_from_dict(doc)).summary["negative_impact"]


def static_defense(kind: str) -> dict:
    return {"mode": "static", "rules": [{"kind": kind}], "static_index": 0}


def median_over_seeds(fn) -> float:
    return float(np.median([fn(seed) for seed in SEEDS]))


def test_criterion_1_no_attack_baseline():
    doc = json.loads(json.dumps(TASK))
    doc.update({"seed": 1, "rounds": 200, "malicious_fraction": 0.0,
                "defense": static_defense("mean")})
    start = time.monotonic()
    log = run_experiment(config_from_dict(doc), threads=1)
    elapsed = time.monotonic() - start
    best = max(r.test_accuracy for r in log.records)
    ok = best >= 0.90 and elapsed < 120.0
    assert report(
        "criterion 1 (no-attack baseline)", ok,
        f"best accuracy {best:.4f} within 200 rounds, {elapsed:.1f}s single-threaded",
    )


@pytest.fixture(scope="module")
def agnostic_grid():
    defenses = {kind: static_defense(kind) for kind in RULE_KINDS}
    defenses["black_box_uniform"] = {"mode": "black_box_uniform"}
    defenses["black_box_weighted"] = {"mode": "black_box_weighted"}
    grid = {}
    for attack in ("gaussian", "lie"):
        for name, defense in defenses.items():
            grid[(attack, name)] = median_over_seeds(
                lambda s: run_impact(s, 200, {"kind": attack}, defense)
            )
    grid[("gaussian", "mean")] = median_over_seeds(
        lambda s: run_impact(s, 200, {"kind": "gaussian"}, static_defense("mean"))
    )
    return grid


def test_criterion_2_agr_agnostic_defense(agnostic_grid):
    defended_names = list(RULE_KINDS) + ["black_box_uniform", "black_box_weighted"]
    defended = {
        (attack, name): agnostic_grid[(attack, name)]
        for attack in ("gaussian", "lie") for name in defended_names
    }
    capped = all(v <= 0.05 for v in defended.values())
    mean_impact = agnostic_grid[("gaussian", "mean")]
    worst_gauss = max(agnostic_grid[("gaussian", name)] for name in defended_names)
    amplified = mean_impact >= 3.0 * worst_gauss
    ok = capped and amplified
    assert report(
        "criterion 2 (AGR-agnostic defense)", ok,
        f"max defended impact {max(defended.values()):.4f} (cap 0.05), "
        f"undefended mean {mean_impact:.4f} >= 3x{worst_gauss:.4f}",
    )


@pytest.fixture(scope="module")
def adaptive_grid():
    grid = {}
    for attack in ("fang", "she"):
        spec = {"kind": attack}
        static_by_seed = [
            max(run_impact(seed, 100, spec, static_defense(kind)) for kind in RULE_KINDS)
            for seed in SEEDS
        ]
        grid[(attack, "static_targeted")] = float(np.median(static_by_seed))
        for name, defense in (
            ("white_box_dynamic", {"mode": "white_box_dynamic"}),
            ("black_box_uniform", {"mode": "black_box_uniform"}),
            ("black_box_weighted", {"mode": "black_box_weighted"}),
        ):
            grid[(attack, name)] = median_over_seeds(
                lambda s: run_impact(s, 100, spec, defense)
            )
    return grid


def test_criterion_3_agr_adaptive_ordering(adaptive_grid):
    ok = True
    details = []
    for attack in ("fang", "she"):
        st = adaptive_grid[(attack, "static_targeted")]
        wbd = adaptive_grid[(attack, "white_box_dynamic")]
        bbu = adaptive_grid[(attack, "black_box_uniform")]
        bbw = adaptive_grid[(attack, "black_box_weighted")]
        ordered = st >= wbd >= bbu >= bbw
        margin = st - bbu >= 0.03
        ok = ok and ordered and margin
        details.append(
            f"{attack}: {st:.4f} >= {wbd:.4f} >= {bbu:.4f} >= {bbw:.4f}"
            f" (static-bbu gap {st - bbu:.4f})"
        )
    assert report("criterion 3 (AGR-adaptive ordering)", ok, "; ".join(details))


def test_criterion_4_bruteforce_oracle_equivalence():
    rng = np.random.default_rng(4242)
    instances = 0
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 8))
        d = int(rng.integers(1, 4))
        matrix = (rng.integers(-3, 4, size=(m, d)).astype(float)
                  if rng.random() < 0.5 else rng.normal(0, 1, size=(m, d)))
        rows, points = list(matrix), matrix.tolist()
        pairs = [(agg_median(rows), oracle_median(points))]
        if 2 * int(np.floor(0.2 * m)) < m:
            pairs.append((agg_trimmed_mean(rows, 0.2), oracle_trimmed_mean(points, 0.2)))
        h = int(rng.integers(0, 3))
        if m >= h + 3:
            k = int(rng.integers(1, m + 1))
            pairs.append((agg_krum(rows, h, k), oracle_krum(points, h, k)))
        if m - 4 * h >= 1 and m >= h + 3:
            pairs.append((agg_bulyan(rows, h), oracle_bulyan(points, h)))
        for impl, ref in pairs:
            worst = max(worst, float(np.abs(np.asarray(impl) - np.asarray(ref)).max()))
        instances += 1
    ok = instances >= 1000 and worst <= 1e-12
    assert report(
        "criterion 4 (brute-force oracle equivalence)", ok,
        f"{instances} instances, worst deviation {worst:.2e} (tol 1e-12)",
    )


def test_criterion_5_theorem1_checker():
    res = theorem1_check([-2.0, 2.0], [0.4, 0.6])
    example_ok = (res.threshold == pytest.approx(0.5) and res.robust
                  and res.expected_inner == pytest.approx(0.4))
    rng = np.random.default_rng(55)
    robust_seen = 0
    positive = 0
    attempts = 0
    while robust_seen < 1000 and attempts < 100_000:
        attempts += 1
        m = int(rng.integers(2, 7))
        ips = rng.uniform(-3, 3, size=m)
        p = rng.dirichlet(np.ones(m))
        res = theorem1_check(ips, p)
        if not res.robust:
            continue
        robust_seen += 1
        # Monte Carlo expectation of the inner product under P; the draw
        # count adapts to the analytic margin so the estimate is decisive.
        spread = float(np.sqrt(p @ (ips - res.expected_inner) ** 2))
        margin = max(res.expected_inner, 1e-6)
        n = int(min(400_000, max(2000, (8 * spread / margin) ** 2)))
        draws = rng.choice(m, size=n, p=p)
        if float(ips[draws].mean()) > 0.0:
            positive += 1
    ok = example_ok and robust_seen == 1000 and positive == 1000
    assert report(
        "criterion 5 (robust-mass condition checker)", ok,
        f"worked example {'ok' if example_ok else 'wrong'}; "
        f"{positive}/{robust_seen} robust-flagged instances with positive MC inner product",
    )


def straightline_eta(L, G_l2, G_g2, K, h_m, T, E_alpha, F0_gap):
    num = 32 * L * F0_gap + (6 + 10 / (K - h_m)) * G_l2 + 7 * G_g2
    den = (8 * L * T) * (80 * L * (G_l2 / (K - h_m) + G_g2) + 240 * L * E_alpha * G_l2)
    if den == 0:
        return 1 / (8 * L)
    return min(math.sqrt(num / den), 1 / (8 * L))


def straightline_bound(L, G_l2, G_g2, K, h_m, T, E_alpha, F0_gap, grad0_sq):
    return (
        32 * L * F0_gap / T
        + ((6 / (K - h_m)) * G_l2 + 3 * G_g2) / T
        + 2 * grad0_sq / T
        + 15 * E_alpha * G_g2
        + math.sqrt(32 * L * F0_gap + (6 + 10 / (K - h_m)) * G_l2 + 7 * G_g2)
        * math.sqrt((640 * L**2 * (G_l2 / (K - h_m) + G_g2)
                     + 1920 * L**2 * E_alpha * G_l2) / T)
    )


def test_criterion_6_learning_rate_and_bound_formulas():
    rng = np.random.default_rng(66)
    worst_rel = 0.0
    for _ in range(100):
        c = TheoryInputs(
            L=float(rng.uniform(0.1, 5)), G_l2=float(rng.uniform(0, 4)),
            G_g2=float(rng.uniform(0, 4)), K=int(rng.integers(4, 60)),
            h_m=int(rng.integers(0, 2)), T=int(rng.integers(1, 10_000)),
            expected_alpha=float(rng.uniform(0, 2)),
            F0_gap=float(rng.uniform(0, 10)), grad0_sq=float(rng.uniform(0, 10)),
        )
        eta_ref = straightline_eta(c.L, c.G_l2, c.G_g2, c.K, c.h_m, c.T,
                                   c.expected_alpha, c.F0_gap)
        bound_ref = straightline_bound(c.L, c.G_l2, c.G_g2, c.K, c.h_m, c.T,
                                       c.expected_alpha, c.F0_gap, c.grad0_sq)
        worst_rel = max(
            worst_rel,
            abs(theorem2_eta(c).eta - eta_ref) / eta_ref,
            abs(theorem2_bound(c) - bound_ref) / bound_ref,
        )
    c = TheoryInputs(L=1.5, G_l2=2.0, G_g2=0.8, K=20, h_m=2, T=10**9,
                     expected_alpha=0.4, F0_gap=3.0, grad0_sq=2.0)
    t = c.T
    transient = (
        32 * c.L * c.F0_gap / t
        + ((6 / (c.K - c.h_m)) * c.G_l2 + 3 * c.G_g2) / t + 2 * c.grad0_sq / t
        + math.sqrt(32 * c.L * c.F0_gap + (6 + 10 / (c.K - c.h_m)) * c.G_l2 + 7 * c.G_g2)
        * math.sqrt((640 * c.L**2 * (c.G_l2 / (c.K - c.h_m) + c.G_g2)
                     + 1920 * c.L**2 * c.expected_alpha * c.G_l2) / t)
    )
    radius = 15 * c.expected_alpha * c.G_g2
    limit_err = abs(theorem2_bound(c) - transient - radius)
    ok = worst_rel <= 1e-12 and limit_err <= 1e-9
    assert report(
        "criterion 6 (learning-rate/error-bound formulas)", ok,
        f"worst dual-implementation relative error {worst_rel:.2e} (tol 1e-12); "
        f"T->inf residual {limit_err:.2e} (tol 1e-9)",
    )


def test_criterion_7_expectation_vs_worst_case():
    rng = np.random.default_rng(77)
    violations = 0
    for _ in range(10_000):
        n_a, n_d = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        matrix = rng.uniform(0, 5, size=(n_a, n_d))
        res = impact_comparison(matrix, rng.dirichlet(np.ones(n_d)),
                                rng.dirichlet(np.ones(n_a)))
        if res.expected > res.worst_case + 1e-12:
            violations += 1
    matrix = rng.uniform(0, 5, size=(4, 3))
    p_d = rng.dirichlet(np.ones(3))
    best = int(np.argmax(matrix @ p_d))
    point = np.zeros(4)
    point[best] = 1.0
    res = impact_comparison(matrix, p_d, point)
    tight = res.expected == pytest.approx(res.worst_case, abs=1e-12)
    ok = violations == 0 and tight
    assert report(
        "criterion 7 (expected <= worst-case impact)", ok,
        f"{violations} violations in 10000 draws; point-mass equality {'holds' if tight else 'fails'}",
    )


def test_criterion_8_determinism(tmp_path):
    doc = json.loads(json.dumps(TASK))
    doc.update({"seed": 11, "rounds": 5, "n_clients": 40, "sample_ratio": 0.5,
                "malicious_fraction": 0.1, "attack": {"kind": "lie"},
                "defense": {"mode": "black_box_weighted"}})
    doc["dataset"].update({"samples_per_client": 20, "test_samples": 400, "root_size": 80})
    cfg = config_from_dict(doc)
    blobs = []
    for i, threads in enumerate((1, 1, 4)):
        path = tmp_path / f"run{i}.jsonl"
        write_log(run_experiment(cfg, threads=threads), path)
        blobs.append(path.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    assert report(
        "criterion 8 (byte-identical determinism)", ok,
        f"repeat and 4-thread logs identical: {ok}",
    )


def test_criterion_9_gradient_correctness():
    rng = np.random.default_rng(99)
    worst = 0.0
    for arch in (Architecture.LINEAR, Architecture.MLP):
        data = synth_dataset(4, 48, 6, 2.0, rng)
        spec = ModelSpec(arch, 6, 4, hidden_width=8)
        for _ in range(5):  # 5 points x 2 architectures = 10 random points
            model = Model(spec, rng.normal(0, 0.5, spec.dimension))
            g = gradient(model, data)
            coords = rng.choice(spec.dimension, size=20, replace=False)
            eps = 1e-6
            for c in coords:
                plus, minus = model.params.copy(), model.params.copy()
                plus[c] += eps
                minus[c] -= eps
                fd = (model.loss(data, params=plus) - model.loss(data, params=minus)) / (2 * eps)
                worst = max(worst, abs(g[c] - fd) / max(1e-8, abs(fd)))
    ok = worst < 1e-4
    assert report(
        "criterion 9 (gradient finite-difference check)", ok,
        f"worst relative error {worst:.2e} over 10 points x 20 coordinates (tol 1e-4)",
    )
