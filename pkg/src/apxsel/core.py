"""Domain types shared by every solver, plus exact metric computation.

A selection query with an expensive boolean predicate is answered per
*group* (the tuples sharing one value of a correlated column).  A
:class:`Strategy` assigns each group a retrieve probability ``R`` and an
evaluate probability ``E`` with ``0 <= E <= R <= 1``:

- retrieved-and-evaluated tuples are kept only if the predicate holds,
- retrieved-but-unevaluated tuples are emitted as-is (predicted correct),
- unretrieved tuples are discarded (predicted incorrect).

Precision and recall of a finished run are exact rational functions of the
per-group realized counts; they are computed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence


class InfeasibleError(Exception):
    """Raised when a solver cannot produce a strategy meeting its constraints.

    Callers that can tolerate infeasibility fall back to the universal
    strategy ``R = E = 1`` (evaluate everything), which is deterministically
    precision 1 / recall 1 at full cost.
    """


@dataclass(frozen=True)
class Constraints:
    """Query quality requirements.

    alpha: precision lower bound; beta: recall lower bound; rho: required
    probability that both bounds hold.  ``rho = 1`` is rejected because the
    Chebyshev factor ``1/sqrt(1 - rho)`` diverges there.
    """

    alpha: float
    beta: float
    rho: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(
                f"satisfaction probability must be in [0, 1), got {self.rho}"
            )


@dataclass(frozen=True)
class CostModel:
    """Per-tuple costs: ``retrieve`` per retrieved tuple, ``evaluate`` per
    predicate evaluation.  Evaluation implies retrieval, so an evaluated
    tuple costs ``retrieve + evaluate``."""

    retrieve: float
    evaluate: float

    def __post_init__(self) -> None:
        if self.retrieve < 0 or self.evaluate < 0:
            raise ValueError("costs must be nonnegative")


_VAR_CEILING_SLACK = 1e-12


@dataclass(frozen=True)
class GroupStats:
    """Size and (estimated) selectivity of one group.

    ``selectivity`` is the probability that a tuple of the group satisfies
    the predicate; ``variance`` is the variance of that estimate (0 when the
    selectivity is known exactly).  ``sampled`` / ``sampled_positive`` count
    tuples already evaluated while estimating, which later solvers may treat
    as sunk cost and free output.
    """

    group_id: Any
    size: int
    selectivity: float
    variance: float = 0.0
    sampled: int = 0
    sampled_positive: int = 0

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"group {self.group_id!r}: size must be >= 1")
        if not 0.0 <= self.selectivity <= 1.0:
            raise ValueError(
                f"group {self.group_id!r}: selectivity must be in [0, 1]"
            )
        ceiling = self.selectivity * (1.0 - self.selectivity)
        if self.variance < 0 or self.variance > ceiling + _VAR_CEILING_SLACK:
            raise ValueError(
                f"group {self.group_id!r}: variance {self.variance} outside "
                f"[0, s(1-s)] = [0, {ceiling}]"
            )
        if not 0 <= self.sampled <= self.size:
            raise ValueError(f"group {self.group_id!r}: sampled outside [0, size]")
        if not 0 <= self.sampled_positive <= self.sampled:
            raise ValueError(
                f"group {self.group_id!r}: sampled_positive outside [0, sampled]"
            )


_PROB_SLACK = 1e-9


@dataclass(frozen=True)
class Strategy:
    """Per-group retrieve/evaluate probabilities, keyed by group id."""

    decisions: Mapping[Any, tuple[float, float]]

    def __post_init__(self) -> None:
        for gid, (r, e) in self.decisions.items():
            if not -_PROB_SLACK <= e <= r + _PROB_SLACK or r > 1.0 + _PROB_SLACK:
                raise ValueError(
                    f"group {gid!r}: need 0 <= E <= R <= 1, got R={r}, E={e}"
                )

    def retrieve(self, group_id: Any) -> float:
        return self.decisions[group_id][0]

    def evaluate(self, group_id: Any) -> float:
        return self.decisions[group_id][1]

    def groups(self) -> Iterable[Any]:
        return self.decisions.keys()

    def items(self) -> Iterable[tuple[Any, tuple[float, float]]]:
        return self.decisions.items()

    @classmethod
    def universal(cls, group_ids: Iterable[Any]) -> "Strategy":
        """The fallback strategy R = E = 1 everywhere (evaluate everything)."""
        return cls({gid: (1.0, 1.0) for gid in group_ids})

    @classmethod
    def from_arrays(
        cls, group_ids: Sequence[Any], retrieve: Sequence[float], evaluate: Sequence[float]
    ) -> "Strategy":
        """Build from parallel arrays, clipping float noise into the box."""

        def clip(x: float) -> float:
            return min(1.0, max(0.0, float(x)))

        return cls(
            {
                gid: (clip(r), min(clip(e), clip(r)))
                for gid, r, e in zip(group_ids, retrieve, evaluate)
            }
        )


@dataclass(frozen=True)
class RealizedCounts:
    """Realized per-group tallies of one executed run.

    ``retrieved_pos``/``retrieved_neg`` count correct/incorrect tuples
    retrieved, ``evaluated_pos``/``evaluated_neg`` the evaluated subsets,
    and ``correct`` the group's total number of correct tuples.  ``size``
    is the group size (0 = unknown, skips the occupancy check).
    """

    group_id: Any
    retrieved_pos: int
    retrieved_neg: int
    evaluated_pos: int
    evaluated_neg: int
    correct: int
    size: int = 0

    def __post_init__(self) -> None:
        counts = (
            self.retrieved_pos,
            self.retrieved_neg,
            self.evaluated_pos,
            self.evaluated_neg,
            self.correct,
        )
        if any(c < 0 for c in counts):
            raise ValueError(f"group {self.group_id!r}: negative count")
        if self.evaluated_pos > self.retrieved_pos:
            raise ValueError(f"group {self.group_id!r}: evaluated_pos > retrieved_pos")
        if self.evaluated_neg > self.retrieved_neg:
            raise ValueError(f"group {self.group_id!r}: evaluated_neg > retrieved_neg")
        if self.retrieved_pos > self.correct:
            raise ValueError(f"group {self.group_id!r}: retrieved_pos > correct")
        if self.size and self.retrieved_pos + self.retrieved_neg > self.size:
            raise ValueError(f"group {self.group_id!r}: retrieved more than size")

    @property
    def output_size(self) -> int:
        """Tuples emitted: retained positives plus unevaluated negatives."""
        return self.retrieved_pos + self.retrieved_neg - self.evaluated_neg


def precision(counts: Iterable[RealizedCounts]) -> float:
    """Fraction of emitted tuples that are correct.

    Evaluated-incorrect tuples are discarded before output, so the output
    size is ``sum(R+ + R- - E-)``.  An empty output is vacuously precise
    (returns 1.0).
    """
    num = 0
    den = 0
    for c in counts:
        num += c.retrieved_pos
        den += c.output_size
    if den == 0:
        return 1.0
    return num / den


def recall(counts: Iterable[RealizedCounts]) -> float:
    """Fraction of all correct tuples present in the output.

    Returns 1.0 when the table holds no correct tuples (vacuous recall).
    """
    num = 0
    den = 0
    for c in counts:
        num += c.retrieved_pos
        den += c.correct
    if den == 0:
        return 1.0
    return num / den


def expected_cost(
    strategy: Strategy,
    groups: Sequence[GroupStats],
    cost: CostModel,
    *,
    discount_sampled: bool = False,
) -> float:
    """Expected execution cost ``sum_a t_a (o_r R_a + o_e E_a)``.

    With ``discount_sampled`` the already-evaluated tuples are charged their
    sunk cost and excluded from the probabilistic part:
    ``sum_a (t_a - F_a)(o_r R_a + o_e E_a) + F_a (o_r + o_e)``.
    """
    total = 0.0
    for g in groups:
        try:
            r, e = strategy.decisions[g.group_id]
        except KeyError:
            raise KeyError(f"strategy is missing group {g.group_id!r}") from None
        live = g.size - g.sampled if discount_sampled else g.size
        total += live * (cost.retrieve * r + cost.evaluate * e)
        if discount_sampled:
            total += g.sampled * (cost.retrieve + cost.evaluate)
    return total
