"""Independent brute-force reference implementations used by the tests.

Everything here is written with plain Python loops and sorting, staying
deliberately unrelated to the numpy paths in the package so a shared bug
cannot hide.
"""

from __future__ import annotations

import math


def sq_dist(a, b) -> float:
    return sum((x - y) ** 2 for x, y in zip(a, b))


def oracle_krum_scores(points, h):
    """Per-point sum of squared distances to its m-h-2 nearest neighbors."""
    m = len(points)
    q = max(0, min(m - h - 2, m - 1))
    scores = []
    for i, p in enumerate(points):
        dists = sorted(sq_dist(p, other) for j, other in enumerate(points) if j != i)
        scores.append(math.fsum(dists[:q]))
    return scores


def oracle_krum(points, h, k):
    """Mean of the k lowest-score points, ties by lowest index."""
    scores = oracle_krum_scores(points, h)
    order = sorted(range(len(points)), key=lambda i: (scores[i], i))
    chosen = [points[i] for i in order[:k]]
    d = len(points[0])
    return [math.fsum(p[j] for p in chosen) / k for j in range(d)]


def oracle_median(points):
    d = len(points[0])
    out = []
    for j in range(d):
        vals = sorted(p[j] for p in points)
        m = len(vals)
        if m % 2:
            out.append(vals[m // 2])
        else:
            out.append((vals[m // 2 - 1] + vals[m // 2]) / 2.0)
    return out


def oracle_trimmed_mean(points, beta):
    d = len(points[0])
    m = len(points)
    t = int(math.floor(beta * m))
    out = []
    for j in range(d):
        vals = sorted(p[j] for p in points)[t : m - t]
        out.append(math.fsum(vals) / len(vals))
    return out


def oracle_bulyan_selection(points, h):
    remaining = list(range(len(points)))
    selected = []
    for _ in range(len(points) - 2 * h):
        sub = [points[i] for i in remaining]
        scores = oracle_krum_scores(sub, h)
        best = min(range(len(sub)), key=lambda i: (scores[i], i))
        selected.append(remaining.pop(best))
    return selected


def oracle_bulyan(points, h):
    m = len(points)
    keep = m - 4 * h
    selected = oracle_bulyan_selection(points, h)
    sel_points = [points[i] for i in selected]
    med = oracle_median(sel_points)
    d = len(points[0])
    out = []
    for j in range(d):
        ranked = sorted(
            range(len(sel_points)),
            key=lambda r: (abs(sel_points[r][j] - med[j]), selected[r]),
        )[:keep]
        out.append(math.fsum(sel_points[r][j] for r in ranked) / keep)
    return out


def oracle_weighted_mean(points, weights):
    total = math.fsum(weights)
    d = len(points[0])
    return [math.fsum(w * p[j] for w, p in zip(weights, points)) / total for j in range(d)]
