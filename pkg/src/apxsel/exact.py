"""Ground-truth solvers for desk-scale instances.

Two oracles live here:

- :func:`solve_perfect_information` enumerates all ``3^|A|`` boolean
  discard / retrieve / retrieve-and-evaluate assignments when the per-group
  correct and incorrect counts are known exactly, with exact rational
  arithmetic at the constraint boundaries.  Minimum-cost set selection of
  this kind is NP-complete in the number of groups, hence the hard cap on
  instance size.
- :func:`grid_oracle` finds the minimum-cost strategy on the probability
  grid ``{0, 1/q, ..., 1}`` subject to the linear threshold constraints,
  via an exact integer linear program over the scaled grid coordinates.
  :func:`feasible_grid_minimum` is the brute-force cousin that accepts an
  arbitrary feasibility predicate (used to cross-check nonlinear solvers on
  tiny instances).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .bounds import Thresholds, hoeffding_thresholds
from .core import Constraints, CostModel, GroupStats, Strategy

MAX_EXACT_GROUPS = 16
MAX_GRID_GROUPS = 3
MAX_GRID_RESOLUTION = 400


@dataclass(frozen=True)
class PerfectInfoGroup:
    """One group with exactly known correct / incorrect tuple counts."""

    group_id: Any
    correct: int
    wrong: int

    def __post_init__(self) -> None:
        if self.correct < 0 or self.wrong < 0:
            raise ValueError(f"group {self.group_id!r}: negative count")
        if self.correct + self.wrong < 1:
            raise ValueError(f"group {self.group_id!r}: empty group")

    @property
    def size(self) -> int:
        return self.correct + self.wrong


def _exact(x: float) -> Fraction:
    """Decimal-faithful rational for a float parameter (0.8 -> 4/5)."""
    return Fraction(str(x))


def solve_perfect_information(
    groups: Sequence[PerfectInfoGroup],
    constraints: Constraints,
    cost: CostModel,
) -> Optional[Strategy]:
    """Minimum-cost boolean strategy when all predicate values are known.

    Enumerates every assignment of {discard, retrieve, retrieve+evaluate}
    per group and keeps the cheapest one satisfying both

    - recall:     sum(C_a R_a) >= beta * sum(C_a)
    - precision:  sum(((1-alpha) C_a - alpha W_a) R_a + alpha W_a E_a) >= 0
      (trivially satisfied when alpha = 0)

    using exact rationals so boundary ties are decided correctly.  Ties are
    broken by fewer evaluated tuples, then fewer retrieved tuples, then the
    lexicographically smallest assignment in input group order.  Returns
    ``None`` when no assignment is feasible (impossible for alpha, beta <= 1
    since evaluating everything always qualifies).
    """
    if len(groups) > MAX_EXACT_GROUPS:
        raise ValueError(
            f"instance too large for exact solver: {len(groups)} groups "
            f"(limit {MAX_EXACT_GROUPS})"
        )
    alpha = _exact(constraints.alpha)
    beta = _exact(constraints.beta)
    o_r = _exact(cost.retrieve)
    o_e = _exact(cost.evaluate)

    recall_target = beta * sum(g.correct for g in groups)
    # Precision constraint scaled through by alpha to stay polynomial:
    # ((1-a) C - a W) R + a W E >= 0.
    prec_r = [(1 - alpha) * g.correct - alpha * g.wrong for g in groups]
    prec_e = [alpha * g.wrong for g in groups]

    best_key = None
    best: Optional[tuple[int, ...]] = None
    # Per-group actions: (R, E) in {(0,0), (1,0), (1,1)}.
    for assignment in itertools.product(((0, 0), (1, 0), (1, 1)), repeat=len(groups)):
        recall_lhs = sum(g.correct * re[0] for g, re in zip(groups, assignment))
        if recall_lhs < recall_target:
            continue
        if alpha > 0:
            prec_lhs = sum(
                cr * re[0] + ce * re[1]
                for cr, ce, re in zip(prec_r, prec_e, assignment)
            )
            if prec_lhs < 0:
                continue
        run_cost = sum(
            g.size * (o_r * re[0] + o_e * re[1]) for g, re in zip(groups, assignment)
        )
        evaluated = sum(g.size * re[1] for g, re in zip(groups, assignment))
        retrieved = sum(g.size * re[0] for g, re in zip(groups, assignment))
        flat = tuple(x for re in assignment for x in re)
        key = (run_cost, evaluated, retrieved, flat)
        if best_key is None or key < best_key:
            best_key = key
            best = assignment
    if best is None:
        return None
    return Strategy(
        {g.group_id: (float(re[0]), float(re[1])) for g, re in zip(groups, best)}
    )


@dataclass(frozen=True)
class GridSolution:
    strategy: Strategy
    cost: float


def _linear_rows(
    groups: Sequence[GroupStats], constraints: Constraints
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Coefficient rows of the two linear margin constraints.

    Returns (precision row over [R..., E...], recall row, rhs_p, rhs_r) such
    that feasibility means ``row . x >= rhs``.
    """
    t = np.array([g.size for g in groups], dtype=float)
    s = np.array([g.selectivity for g in groups], dtype=float)
    a = constraints.alpha
    coef_r_p = t * s * (1.0 - a) - t * (1.0 - s) * a
    coef_e_p = t * (1.0 - s) * a
    row_p = np.concatenate([coef_r_p, coef_e_p])
    row_r = np.concatenate([t * s, np.zeros_like(t)])
    rhs_r = constraints.beta * float(np.sum(t * s))
    return row_p, row_r, 0.0, rhs_r


def grid_oracle(
    groups: Sequence[GroupStats],
    constraints: Constraints,
    cost: CostModel,
    resolution: int,
    *,
    thresholds: Optional[Thresholds] = None,
) -> Optional[GridSolution]:
    """Cheapest strategy on the grid ``{0, 1/q, ..., 1}`` meeting the linear
    threshold constraints (expected margins >= h_p, h_r).

    Solved exactly as an integer program over the scaled grid coordinates;
    the returned point is re-verified against the constraints.  ``thresholds``
    defaults to the Hoeffding thresholds of the instance; passing explicit
    values lets callers check solvers that use other slack levels.  Returns
    ``None`` when no grid point is feasible.
    """
    m = len(groups)
    if m == 0 or m > MAX_GRID_GROUPS:
        raise ValueError(f"grid oracle supports 1..{MAX_GRID_GROUPS} groups, got {m}")
    if not 1 <= resolution <= MAX_GRID_RESOLUTION:
        raise ValueError(f"resolution must be in [1, {MAX_GRID_RESOLUTION}]")
    if thresholds is None:
        n_total = sum(g.size for g in groups)
        thresholds = hoeffding_thresholds(n_total, constraints.beta, constraints.rho)

    q = resolution
    row_p, row_r, _, rhs_r = _linear_rows(groups, constraints)
    rhs_p = thresholds.precision_slack
    rhs_r = rhs_r + thresholds.recall_slack

    t = np.array([g.size for g in groups], dtype=float)
    objective = np.concatenate([t * cost.retrieve, t * cost.evaluate]) / q
    a_ub = [-row_p / q, -row_r / q]
    b_ub = [-rhs_p, -rhs_r]
    for i in range(m):  # E_i <= R_i
        row = np.zeros(2 * m)
        row[m + i] = 1.0
        row[i] = -1.0
        a_ub.append(row)
        b_ub.append(0.0)
    res = linprog(
        objective,
        A_ub=np.array(a_ub),
        b_ub=np.array(b_ub),
        bounds=[(0, q)] * (2 * m),
        integrality=np.ones(2 * m),
        method="highs",
    )
    if res.status == 2:  # proven infeasible
        return None
    if res.status != 0:
        raise RuntimeError(f"grid oracle solve failed: {res.message}")
    k = np.rint(res.x).astype(int)
    x = k / q
    slack_scale = 1e-9 * max(1.0, float(np.sum(t)))
    if (row_p @ x) < rhs_p - slack_scale or (row_r @ x) < rhs_r - slack_scale:
        raise RuntimeError("grid oracle returned an infeasible point")
    strategy = Strategy.from_arrays([g.group_id for g in groups], x[:m], x[m:])
    return GridSolution(strategy=strategy, cost=float(objective @ k))


_MAX_BRUTE_POINTS = 40_000_000


def feasible_grid_minimum(
    groups: Sequence[GroupStats],
    cost: CostModel,
    resolution: int,
    feasible: Callable[[np.ndarray, np.ndarray], np.ndarray],
    *,
    batch: int = 500_000,
) -> Optional[GridSolution]:
    """Brute-force minimum-cost grid point under an arbitrary predicate.

    ``feasible(R, E)`` receives ``(m, k)`` arrays of candidate columns and
    returns a boolean mask of feasible candidates.  Enumeration covers every
    per-group pair with ``E <= R``, so the candidate count is
    ``((q+1)(q+2)/2)^m``; instances beyond ``_MAX_BRUTE_POINTS`` are
    rejected.  This is the oracle of last resort for nonlinear constraints.
    """
    m = len(groups)
    q = resolution
    pairs = np.array(
        [(r, e) for r in range(q + 1) for e in range(r + 1)], dtype=np.int32
    )
    total = len(pairs) ** m
    if total > _MAX_BRUTE_POINTS:
        raise ValueError(
            f"brute-force grid too large: {len(pairs)}^{m} = {total} points"
        )
    t = np.array([g.size for g in groups], dtype=float)
    unit_cost = np.stack([t * cost.retrieve, t * cost.evaluate])  # (2, m)

    best_cost = math.inf
    best_rx: Optional[np.ndarray] = None
    best_ex: Optional[np.ndarray] = None
    indices = np.arange(total, dtype=np.int64)
    for start in range(0, total, batch):
        idx = indices[start : start + batch]
        digits = idx[:, None] // (len(pairs) ** np.arange(m)[None, :]) % len(pairs)
        rr = pairs[digits, 0].T / q  # (m, k)
        ee = pairs[digits, 1].T / q
        costs = unit_cost[0] @ rr + unit_cost[1] @ ee
        mask = np.asarray(feasible(rr, ee), dtype=bool)
        mask &= costs < best_cost
        if not mask.any():
            continue
        sel = np.flatnonzero(mask)
        j = sel[np.argmin(costs[sel])]
        best_cost = float(costs[j])
        best_rx = rr[:, j].copy()
        best_ex = ee[:, j].copy()
    if best_rx is None:
        return None
    strategy = Strategy.from_arrays([g.group_id for g in groups], best_rx, best_ex)
    return GridSolution(strategy=strategy, cost=best_cost)
