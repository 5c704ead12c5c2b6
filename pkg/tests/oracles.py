"""Independent brute-force oracles used to verify the solvers.

Everything here recomputes quantities from first principles (exhaustive
enumeration over outcomes or assignments) without reusing any solver
algebra, so agreement is meaningful evidence.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

# Per-tuple outcome states: (correct?, action) with action one of
# none / retrieve-only / retrieve-and-evaluate.
_N_STATES = 6


def _state_probs(s: float, r: float, e: float) -> np.ndarray:
    return np.array(
        [
            s * (1 - r),       # correct, untouched
            s * (r - e),       # correct, retrieved only
            s * e,             # correct, retrieved + evaluated
            (1 - s) * (1 - r),
            (1 - s) * (r - e),
            (1 - s) * e,
        ]
    )


def _margin_values(alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # Precision margin counts (correct output) - alpha * (output size);
    # recall margin counts (correct output) - beta * (correct anywhere).
    p_vals = np.array([0.0, 1 - alpha, 1 - alpha, 0.0, -alpha, 0.0])
    r_vals = np.array([-beta, 1 - beta, 1 - beta, 0.0, 0.0, 0.0])
    return p_vals, r_vals


def _conditional_moments(t, s, r, e, alpha, beta):
    """Exact first and second moments of one group's margin contributions,
    given the group selectivity ``s``, by enumerating all 6^t outcomes."""
    states = np.indices((_N_STATES,) * t).reshape(t, -1)
    probs = _state_probs(s, r, e)[states].prod(axis=0)
    p_vals, r_vals = _margin_values(alpha, beta)
    pv = p_vals[states].sum(axis=0)
    rv = r_vals[states].sum(axis=0)
    return (
        float(probs @ pv),
        float(probs @ (pv * pv)),
        float(probs @ rv),
        float(probs @ (rv * rv)),
    )


def exact_margin_deviations(
    sizes: Sequence[int],
    priors: Sequence[Sequence[tuple[float, float]]],
    retrieve: Sequence[float],
    evaluate: Sequence[float],
    alpha: float,
    beta: float,
    comonotone: bool = False,
) -> tuple[float, float]:
    """Exact standard deviations of the precision and recall margins.

    ``priors[a]`` lists ``(probability, selectivity)`` support points of
    group ``a``'s selectivity distribution.  Draws are independent across
    groups unless ``comonotone``, in which case all groups share one draw
    index (every prior must then have the same point probabilities).
    """
    if not comonotone:
        var_p = var_r = 0.0
        for t, prior, r, e in zip(sizes, priors, retrieve, evaluate):
            m1p = m2p = m1r = m2r = 0.0
            for prob, s in prior:
                c1p, c2p, c1r, c2r = _conditional_moments(t, s, r, e, alpha, beta)
                m1p += prob * c1p
                m2p += prob * c2p
                m1r += prob * c1r
                m2r += prob * c2r
            var_p += m2p - m1p * m1p
            var_r += m2r - m1r * m1r
        return math.sqrt(max(var_p, 0.0)), math.sqrt(max(var_r, 0.0))

    k = len(priors[0])
    weights = [p for p, _ in priors[0]]
    for prior in priors:
        assert len(prior) == k and all(
            abs(prior[i][0] - weights[i]) < 1e-12 for i in range(k)
        ), "comonotone draws need identical point probabilities"
    mean_p = mean_r = e2_p = e2_r = 0.0
    for i in range(k):
        cm_p = cm_r = cv_p = cv_r = 0.0
        for t, prior, r, e in zip(sizes, priors, retrieve, evaluate):
            s = prior[i][1]
            c1p, c2p, c1r, c2r = _conditional_moments(t, s, r, e, alpha, beta)
            cm_p += c1p
            cm_r += c1r
            cv_p += c2p - c1p * c1p
            cv_r += c2r - c1r * c1r
        mean_p += weights[i] * cm_p
        mean_r += weights[i] * cm_r
        e2_p += weights[i] * (cv_p + cm_p * cm_p)
        e2_r += weights[i] * (cv_r + cm_r * cm_r)
    return (
        math.sqrt(max(e2_p - mean_p * mean_p, 0.0)),
        math.sqrt(max(e2_r - mean_r * mean_r, 0.0)),
    )


def prior_mean_var(prior: Sequence[tuple[float, float]]) -> tuple[float, float]:
    mean = sum(p * s for p, s in prior)
    var = sum(p * s * s for p, s in prior) - mean * mean
    return mean, max(var, 0.0)


def min_knapsack_cover(
    correct: Sequence[int], sizes: Sequence[int], beta: float, unit_cost: float
) -> float:
    """Cheapest subset of groups covering ``beta * sum(correct)`` correct
    tuples, paying ``unit_cost`` per tuple of every chosen group."""
    need = beta * sum(correct)
    best = math.inf
    m = len(correct)
    for mask in range(1 << m):
        got = sum(c for i, c in enumerate(correct) if mask >> i & 1)
        if got >= need:
            cost = sum(t for i, t in enumerate(sizes) if mask >> i & 1) * unit_cost
            best = min(best, cost)
    return best


def boolean_assignment_minimum(
    correct: Sequence[int],
    wrong: Sequence[int],
    alpha: float,
    beta: float,
    retrieve_cost: float,
    evaluate_cost: float,
):
    """Direct float re-enumeration of all discard/retrieve/evaluate
    assignments; returns (cost, assignment) or None."""
    m = len(correct)
    best = None
    for assignment in itertools.product(((0, 0), (1, 0), (1, 1)), repeat=m):
        recall_ok = sum(c * a[0] for c, a in zip(correct, assignment)) >= beta * sum(
            correct
        ) - 1e-12
        if not recall_ok:
            continue
        if alpha > 0:
            lhs = sum(
                ((1 - alpha) * c - alpha * w) * a[0] + alpha * w * a[1]
                for c, w, a in zip(correct, wrong, assignment)
            )
            if lhs < -1e-12:
                continue
        cost = sum(
            (c + w) * (retrieve_cost * a[0] + evaluate_cost * a[1])
            for c, w, a in zip(correct, wrong, assignment)
        )
        if best is None or cost < best[0] - 1e-12:
            best = (cost, assignment)
    return best
