"""Two-pass greedy solver for the known-selectivities linear program.

With exact per-group selectivities the optimal fractional strategy has a
simple structure: retrieval probability is filled greedily in decreasing
selectivity order until the recall margin reaches its threshold (at most
one group fractional), then evaluation probability is filled over the
retrieved groups in *increasing* selectivity order until the precision
margin reaches its threshold (again at most one group strictly interior).
Runs in ``O(|A| log |A|)``.

Also provides the sufficient-feasibility precheck and the closed-form bound
on how far the thresholded linear program's optimum can sit above the true
probabilistic optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .bounds import (
    Thresholds,
    hoeffding_thresholds,
    precision_margin,
    recall_margin,
)
from .core import Constraints, CostModel, GroupStats, InfeasibleError, Strategy

MARGIN_SLACK = 1e-9


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of the sufficient-condition precheck, with per-condition slack.

    ``precision_slack`` is ``sum(max(t(s - alpha), 0)) - h_p`` and
    ``recall_slack`` is ``sum((1-beta) t s) - h_r``; the condition holds when
    its slack is strictly positive.
    """

    precision_ok: bool
    recall_ok: bool
    precision_slack: float
    recall_slack: float

    @property
    def ok(self) -> bool:
        return self.precision_ok and self.recall_ok

    def describe(self) -> str:
        parts = []
        if not self.precision_ok:
            parts.append(
                f"precision headroom condition fails (slack {self.precision_slack:.4g})"
            )
        if not self.recall_ok:
            parts.append(
                f"recall attainability condition fails (slack {self.recall_slack:.4g})"
            )
        return "; ".join(parts) if parts else "feasible"


def _default_thresholds(
    groups: Sequence[GroupStats], constraints: Constraints
) -> Thresholds:
    n_total = sum(g.size for g in groups)
    return hoeffding_thresholds(n_total, constraints.beta, constraints.rho)


def check_feasibility(
    groups: Sequence[GroupStats],
    constraints: Constraints,
    *,
    thresholds: Optional[Thresholds] = None,
) -> FeasibilityReport:
    """Evaluate the two sufficient conditions for the greedy solve.

    The precision condition requires enough headroom from groups whose
    selectivity exceeds alpha (``h_p < sum(max(t(s - alpha), 0))``); the
    recall condition requires the recall threshold to be attainable at all
    (``h_r < sum((1-beta) t s)``).  Failure is reported, not raised: the
    conditions are sufficient, not necessary.
    """
    if thresholds is None:
        thresholds = _default_thresholds(groups, constraints)
    head = sum(
        max(g.size * (g.selectivity - constraints.alpha), 0.0) for g in groups
    )
    attainable = sum(
        (1.0 - constraints.beta) * g.size * g.selectivity for g in groups
    )
    p_slack = head - thresholds.precision_slack
    r_slack = attainable - thresholds.recall_slack
    return FeasibilityReport(
        precision_ok=p_slack > 0,
        recall_ok=r_slack > 0,
        precision_slack=p_slack,
        recall_slack=r_slack,
    )


def solve_bigreedy(
    groups: Sequence[GroupStats],
    constraints: Constraints,
    cost: CostModel,
    *,
    thresholds: Optional[Thresholds] = None,
    precheck: bool = True,
) -> Strategy:
    """Solve the thresholded linear program with the two greedy passes.

    Raises :class:`InfeasibleError` when the precheck fails (callers decide
    whether to fall back to the universal strategy) or when a pass exhausts
    all groups without meeting its threshold.  Equal-selectivity groups are
    ordered by descending size then group id so output is deterministic.
    """
    if thresholds is None:
        thresholds = _default_thresholds(groups, constraints)
    if precheck:
        report = check_feasibility(groups, constraints, thresholds=thresholds)
        if not report.ok:
            raise InfeasibleError(f"greedy precheck failed: {report.describe()}")

    by_selectivity = sorted(
        groups, key=lambda g: (-g.selectivity, -g.size, str(g.group_id))
    )
    retrieve = {g.group_id: 0.0 for g in groups}
    evaluate = {g.group_id: 0.0 for g in groups}

    # Pass 1: raise R in decreasing-selectivity order until the recall
    # margin reaches its threshold; the last touched group ends fractional.
    target = constraints.beta * sum(g.size * g.selectivity for g in groups)
    target += thresholds.recall_slack
    acc = 0.0
    for g in by_selectivity:
        if acc >= target:
            break
        room = g.size * g.selectivity
        if room <= 0.0:
            continue
        if acc + room < target:
            retrieve[g.group_id] = 1.0
            acc += room
        else:
            retrieve[g.group_id] = min(1.0, (target - acc) / room)
            acc = target
    if acc < target:
        raise InfeasibleError(
            "recall threshold unreachable even with every group retrieved"
        )

    # Pass 2: raise E over retrieved groups in increasing-selectivity order
    # until the precision margin reaches its threshold.
    strategy = Strategy({gid: (retrieve[gid], 0.0) for gid in retrieve})
    needed = thresholds.precision_slack - precision_margin(
        strategy, groups, constraints.alpha
    )
    if needed > 0:
        for g in reversed(by_selectivity):
            r = retrieve[g.group_id]
            if r <= 0.0:
                continue
            gain_per_unit = constraints.alpha * g.size * (1.0 - g.selectivity)
            if gain_per_unit <= 0.0:
                continue
            full_gain = gain_per_unit * r
            if full_gain < needed:
                evaluate[g.group_id] = r
                needed -= full_gain
            else:
                evaluate[g.group_id] = min(r, needed / gain_per_unit)
                needed = 0.0
                break
        if needed > MARGIN_SLACK:
            raise InfeasibleError(
                "precision threshold unreachable with the retrieved groups"
            )

    result = Strategy(
        {gid: (retrieve[gid], evaluate[gid]) for gid in retrieve}
    )
    p_ok = (
        precision_margin(result, groups, constraints.alpha)
        >= thresholds.precision_slack - MARGIN_SLACK
    )
    r_ok = (
        recall_margin(result, groups, constraints.beta)
        >= thresholds.recall_slack - MARGIN_SLACK
    )
    if not (p_ok and r_ok):
        raise InfeasibleError("greedy output failed its own margin re-check")
    return result


def tightness_gap(
    groups: Sequence[GroupStats],
    constraints: Constraints,
    cost: CostModel,
) -> float:
    """Worst-case cost excess of the thresholded linear optimum over the
    true probabilistic optimum:

    ``(o_e + o_r) / s_min * max(h_r(rho) + h_r(1-rho),
    (h_p(rho) + h_p(1-rho)) / (1 - alpha))``

    where ``s_min`` is the smallest nonzero selectivity.  Infinite at
    ``rho = 0`` (the mirrored threshold diverges).
    """
    if constraints.alpha >= 1.0:
        raise ValueError("bound undefined at alpha=1")
    nonzero = [g.selectivity for g in groups if g.selectivity > 0]
    if not nonzero:
        raise ValueError("bound requires at least one group with selectivity > 0")
    if constraints.rho == 0.0:
        return math.inf
    n_total = sum(g.size for g in groups)
    ours = hoeffding_thresholds(n_total, constraints.beta, constraints.rho)
    mirrored = hoeffding_thresholds(n_total, constraints.beta, 1.0 - constraints.rho)
    recall_pair = ours.recall_slack + mirrored.recall_slack
    precision_pair = (ours.precision_slack + mirrored.precision_slack) / (
        1.0 - constraints.alpha
    )
    return (
        (cost.evaluate + cost.retrieve)
        / min(nonzero)
        * max(recall_pair, precision_pair)
    )
