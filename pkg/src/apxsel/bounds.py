"""Concentration thresholds and expected-margin / deviation algebra.

The probabilistic guarantees rest on two tools:

- Hoeffding slack thresholds ``h_p`` and ``h_r``: when the expected
  precision/recall margins exceed these, the realized margins are
  nonnegative with probability at least ``rho``.  Both grow as
  ``sqrt(ln(1/(1-rho)) * n / 2)`` (the recall threshold carries an extra
  ``(1 - beta)`` width factor).
- Chebyshev factor ``e_rho = 1/sqrt(1-rho)``: with noisy selectivity
  estimates, a margin of ``e_rho`` standard deviations guarantees the same.
  Closed-form upper bounds on those standard deviations are provided here
  for two correlation assumptions between group estimates:

  * ``"unknown"``   - worst case, sum of per-group deviation bounds,
  * ``"independent"`` - per-group variances add, giving the tighter
    root-of-sum-of-squares form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import GroupStats, Strategy

MODE_UNKNOWN = "unknown"
MODE_INDEPENDENT = "independent"
DEVIATION_MODES = (MODE_UNKNOWN, MODE_INDEPENDENT)


@dataclass(frozen=True)
class Thresholds:
    """Additive slacks for the expected margins plus the Chebyshev factor."""

    precision_slack: float
    recall_slack: float
    chebyshev: float

    def __post_init__(self) -> None:
        for v in (self.precision_slack, self.recall_slack, self.chebyshev):
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError("thresholds must be nonnegative and finite")


def chebyshev_factor(rho: float) -> float:
    """``1/sqrt(1-rho)``: margin-to-deviation ratio required by Chebyshev."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("satisfaction probability must be < 1")
    return 1.0 / math.sqrt(1.0 - rho)


def hoeffding_thresholds(n_total: int, beta: float, rho: float) -> Thresholds:
    """Hoeffding slacks for a table of ``n_total`` tuples.

    ``h_p = sqrt(ln(1/(1-rho)) * n / 2)`` and
    ``h_r = sqrt(ln(1/(1-rho)) * n * (1-beta) / 2)``; both vanish at
    ``rho = 0`` and diverge as ``rho -> 1``.
    """
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    if not 0.0 <= rho < 1.0:
        raise ValueError("satisfaction probability must be < 1")
    log_term = math.log(1.0 / (1.0 - rho))
    h_p = math.sqrt(log_term * n_total / 2.0)
    h_r = math.sqrt(log_term * n_total * (1.0 - beta) / 2.0)
    return Thresholds(h_p, h_r, chebyshev_factor(rho))


def _live_size(g: GroupStats, discount_sampled: bool) -> int:
    return g.size - g.sampled if discount_sampled else g.size


def precision_margin(
    strategy: Strategy,
    groups: Sequence[GroupStats],
    alpha: float,
    *,
    discount_sampled: bool = False,
) -> float:
    """Expected value of (correct output) - alpha * (output size).

    Per group this is ``t s (1-alpha) R + t (1-s) alpha (E - R)``.  With
    ``discount_sampled`` the already-evaluated tuples contribute their known
    positives as constants: ``F+ (1-alpha)`` plus the same expression over
    the ``t - F`` remaining tuples.
    """
    total = 0.0
    for g in groups:
        r, e = strategy.decisions[g.group_id]
        t = _live_size(g, discount_sampled)
        s = g.selectivity
        total += t * s * (1.0 - alpha) * r + t * (1.0 - s) * alpha * (e - r)
        if discount_sampled:
            total += g.sampled_positive * (1.0 - alpha)
    return total


def recall_margin(
    strategy: Strategy,
    groups: Sequence[GroupStats],
    beta: float,
    *,
    discount_sampled: bool = False,
) -> float:
    """Expected value of (correct output) - beta * (total correct).

    Per group ``t s R - beta t s``; with ``discount_sampled`` the known
    positives are emitted unconditionally, giving
    ``F+ + (t-F) s R - beta (F+ + (t-F) s)``.
    """
    got = 0.0
    want = 0.0
    for g in groups:
        r, _ = strategy.decisions[g.group_id]
        t = _live_size(g, discount_sampled)
        s = g.selectivity
        got += t * s * r
        want += t * s
        if discount_sampled:
            got += g.sampled_positive
            want += g.sampled_positive
    return got - beta * want


def _check_mode(mode: str) -> None:
    if mode not in DEVIATION_MODES:
        raise ValueError(f"mode must be one of {DEVIATION_MODES}, got {mode!r}")


def deviation_bound_precision(
    strategy: Strategy,
    groups: Sequence[GroupStats],
    alpha: float,
    mode: str,
    *,
    discount_sampled: bool = False,
) -> float:
    """Upper bound on the standard deviation of the precision margin.

    Per group, ``Var <= t^2 v (R - alpha E)^2 + 0.25 t``.  Mode
    ``"independent"`` returns the square root of the summed variance bounds;
    ``"unknown"`` returns the larger sum of per-group deviation bounds
    ``sqrt(v) t (R - alpha E) + 0.5 sqrt(t)``.
    """
    _check_mode(mode)
    if mode == MODE_UNKNOWN:
        total = 0.0
        for g in groups:
            r, e = strategy.decisions[g.group_id]
            t = _live_size(g, discount_sampled)
            total += math.sqrt(g.variance) * t * (r - alpha * e) + 0.5 * math.sqrt(t)
        return total
    acc = 0.0
    for g in groups:
        r, e = strategy.decisions[g.group_id]
        t = _live_size(g, discount_sampled)
        acc += t * t * g.variance * (r - alpha * e) ** 2 + 0.25 * t
    return math.sqrt(acc)


def deviation_bound_recall(
    strategy: Strategy,
    groups: Sequence[GroupStats],
    beta: float,
    mode: str,
    *,
    discount_sampled: bool = False,
) -> float:
    """Upper bound on the standard deviation of the recall margin.

    Same shape as the precision bound with ``(R - alpha E)`` replaced by
    ``|R - beta|`` (mode ``"unknown"``) or ``(R - beta)^2`` under the root
    (mode ``"independent"``).
    """
    _check_mode(mode)
    if mode == MODE_UNKNOWN:
        total = 0.0
        for g in groups:
            r, _ = strategy.decisions[g.group_id]
            t = _live_size(g, discount_sampled)
            total += math.sqrt(g.variance) * t * abs(r - beta) + 0.5 * math.sqrt(t)
        return total
    acc = 0.0
    for g in groups:
        r, _ = strategy.decisions[g.group_id]
        t = _live_size(g, discount_sampled)
        acc += t * t * g.variance * (r - beta) ** 2 + 0.25 * t
    return math.sqrt(acc)
