"""Selectivity estimation from samples and correlated-column discovery.

Evaluated sample tallies turn into Beta-posterior selectivity estimates
(uniform prior), sampling budgets follow either a per-group constant or the
two-third-power rule ``F_a = num * t_a * n^(-1/3)`` (total sample size then
scales as ``n^(2/3)``), and the correlated column can be picked from the
table's own columns by projected solver cost, or learned as a virtual
column by bucketing logistic-regression scores into deciles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from . import bigreedy, convex
from .core import Constraints, CostModel, GroupStats, InfeasibleError, expected_cost
from .dataset import NUMERIC, Dataset


@dataclass(frozen=True)
class SampleTally:
    """Evaluated tuples of one group and how many satisfied the predicate."""

    evaluated: int
    positive: int

    def __post_init__(self) -> None:
        if not 0 <= self.positive <= self.evaluated:
            raise ValueError("need 0 <= positive <= evaluated")


def beta_posterior(tally: SampleTally) -> tuple[float, float]:
    """Posterior mean and variance of a group selectivity after observing
    the tally, under a uniform prior: ``Beta(F+ + 1, F- + 1)`` gives

    ``s = (F+ + 1) / (F + 2)``,  ``v = s (1 - s) / (F + 3)``.

    With no observations this is the uniform distribution (s = 0.5,
    v = 1/12); the mean never reaches 0 or 1 for finite samples.
    """
    s = (tally.positive + 1) / (tally.evaluated + 2)
    v = s * (1.0 - s) / (tally.evaluated + 3)
    return s, v


def group_stats_from_tally(group_id: Any, size: int, tally: SampleTally) -> GroupStats:
    s, v = beta_posterior(tally)
    return GroupStats(
        group_id=group_id,
        size=size,
        selectivity=s,
        variance=v,
        sampled=tally.evaluated,
        sampled_positive=tally.positive,
    )


CONSTANT = "constant"
TWO_THIRD_POWER = "two_third_power"


@dataclass(frozen=True)
class SamplingScheme:
    """Per-group sampling budget rule.

    ``constant`` draws ``param`` tuples from every group; ``two_third_power``
    draws ``round(param * t_a * n^(-1/3))`` with a floor of one tuple, so no
    group is left without evidence.
    """

    kind: str
    param: float

    def __post_init__(self) -> None:
        if self.kind not in (CONSTANT, TWO_THIRD_POWER):
            raise ValueError(f"unknown sampling scheme {self.kind!r}")
        if self.param <= 0:
            raise ValueError("sampling parameter must be > 0")


def sample_budget(scheme: SamplingScheme, sizes: Sequence[int]) -> list[int]:
    """Per-group sample counts, capped at group size."""
    n = sum(sizes)
    if scheme.kind == CONSTANT:
        per_group = int(math.floor(scheme.param + 0.5))
        return [min(per_group, t) for t in sizes]
    scale = n ** (-1.0 / 3.0)
    out = []
    for t in sizes:
        raw = int(math.floor(scheme.param * t * scale + 0.5))
        out.append(min(t, max(1, raw)) if t >= 1 else 0)
    return out


class SampleStore:
    """Append-only record of evaluated tuples per group.

    Draw order is a seeded uniform shuffle per group, so extending a budget
    reveals a longer prefix of the same permutation: samples are cumulative
    and never discarded.  Rows already labeled elsewhere can be preloaded;
    they count as sampled and sit at the front of the draw order.
    """

    def __init__(
        self,
        labels_by_group: Mapping[Any, np.ndarray],
        rng: np.random.Generator,
        preloaded: Optional[Mapping[Any, np.ndarray]] = None,
    ):
        self._labels: dict[Any, np.ndarray] = {}
        self._order: dict[Any, np.ndarray] = {}
        self._revealed: dict[Any, int] = {}
        for gid, labels in labels_by_group.items():
            labels = np.asarray(labels, dtype=bool)
            known = np.asarray(
                preloaded.get(gid, ()) if preloaded else (), dtype=np.int64
            )
            rest = np.setdiff1d(np.arange(len(labels)), known, assume_unique=False)
            self._labels[gid] = labels
            self._order[gid] = np.concatenate([known, rng.permutation(rest)])
            self._revealed[gid] = len(known)

    def group_ids(self) -> list[Any]:
        return list(self._labels)

    def size(self, gid: Any) -> int:
        return len(self._labels[gid])

    def sizes(self) -> list[int]:
        return [len(v) for v in self._labels.values()]

    def extend(self, budgets: Mapping[Any, int]) -> None:
        """Reveal labels up to the given per-group totals (never shrinks)."""
        for gid, want in budgets.items():
            have = self._revealed[gid]
            self._revealed[gid] = min(max(have, int(want)), self.size(gid))

    def sampled_indices(self, gid: Any) -> np.ndarray:
        return self._order[gid][: self._revealed[gid]]

    def tally(self, gid: Any) -> SampleTally:
        idx = self.sampled_indices(gid)
        return SampleTally(
            evaluated=len(idx), positive=int(self._labels[gid][idx].sum())
        )

    def group_stats(self) -> list[GroupStats]:
        return [
            group_stats_from_tally(gid, self.size(gid), self.tally(gid))
            for gid in self._labels
        ]

    def total_sampled(self) -> int:
        return sum(self._revealed.values())


@dataclass(frozen=True)
class AdaptiveSearchResult:
    num: float
    projected_cost: float
    trace: tuple[tuple[float, float], ...]  # (num, projected cost) per step


DEFAULT_NUM_FACTORS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.5, 5.0)


def adaptive_num_search(
    store: SampleStore,
    constraints: Constraints,
    cost: CostModel,
    *,
    num_grid: Optional[Sequence[float]] = None,
    settings: Optional[convex.SolverSettings] = None,
) -> AdaptiveSearchResult:
    """Walk an ascending grid of two-third-power multipliers, extending the
    (cumulative) sample at each step and solving the sunk-sample program to
    project total cost.  Stops early once projected cost has risen on two
    consecutive grid points; returns the multiplier with the lowest
    projection.
    """
    if num_grid is None:
        if constraints.alpha <= 0:
            raise ValueError("default num grid needs alpha > 0; pass num_grid")
        num_grid = [f * constraints.alpha for f in DEFAULT_NUM_FACTORS]
    if not num_grid or list(num_grid) != sorted(num_grid):
        raise ValueError("num_grid must be nonempty and ascending")

    sizes = store.sizes()
    ids = store.group_ids()
    trace: list[tuple[float, float]] = []
    rises = 0
    for num in num_grid:
        budgets = dict(zip(ids, sample_budget(SamplingScheme(TWO_THIRD_POWER, num), sizes)))
        store.extend(budgets)
        stats = store.group_stats()
        try:
            strategy = convex.solve_convex(
                stats, constraints, cost, sampling_aware=True, settings=settings
            )
            projected = expected_cost(strategy, stats, cost, discount_sampled=True)
        except InfeasibleError:
            projected = math.inf
        if trace and projected > trace[-1][1]:
            rises += 1
        else:
            rises = 0
        trace.append((num, projected))
        if rises >= 2:
            break
    best_num, best_cost = min(trace, key=lambda p: p[1])
    if math.isinf(best_cost):
        raise InfeasibleError("every sampling level in the grid was infeasible")
    return AdaptiveSearchResult(num=best_num, projected_cost=best_cost, trace=tuple(trace))


@dataclass(frozen=True)
class ColumnSelection:
    """Outcome of correlated-column discovery."""

    column: str
    groups: tuple[GroupStats, ...]
    column_costs: Mapping[str, float]
    sample_indices: np.ndarray  # table rows whose labels were evaluated
    sample_labels: np.ndarray


def _column_stats(
    dataset: Dataset,
    column: str,
    sample_idx: np.ndarray,
    sample_labels: np.ndarray,
) -> list[GroupStats]:
    values = dataset.column(column)
    sample_values = values[sample_idx]
    stats = []
    for key, rows in dataset.group_indices(column).items():
        in_group = sample_values == key
        tally = SampleTally(
            evaluated=int(in_group.sum()),
            positive=int(sample_labels[in_group].sum()),
        )
        stats.append(group_stats_from_tally(key, len(rows), tally))
    return stats


def select_correlated_column(
    dataset: Dataset,
    constraints: Constraints,
    cost: CostModel,
    *,
    sample_fraction: float = 0.01,
    rng: Optional[np.random.Generator] = None,
) -> ColumnSelection:
    """Pick the table column whose groups give the cheapest projected plan.

    Labels a uniform ~1% bootstrap sample, doubling it while no column has
    at most ``sqrt(t)`` distinct values (t = labeled rows).  Each candidate
    column's per-value selectivities are Beta-posterior estimates from the
    sample; its score is the known-selectivity greedy plan cost (or the
    evaluate-everything cost when that solve is infeasible).  The labeled
    sample is returned for reuse.
    """
    if dataset.n == 0:
        raise ValueError("empty table")
    if rng is None:
        rng = np.random.default_rng()
    n = dataset.n
    labels = dataset.labels()
    perm = rng.permutation(n)
    t = min(n, max(1, math.ceil(sample_fraction * n)))
    feature_names = [c.name for c in dataset.feature_columns()]
    distinct = {name: dataset.distinct_count(name) for name in feature_names}

    def candidates(sample_size: int) -> list[str]:
        limit = math.sqrt(sample_size)
        return [name for name in feature_names if distinct[name] <= limit]

    while not candidates(t):
        if t >= n:
            raise InfeasibleError(
                "no column qualifies even with the whole table labeled"
            )
        t = min(2 * t, n)

    sample_idx = perm[:t]
    sample_labels = labels[sample_idx]
    costs: dict[str, float] = {}
    stats_by_column: dict[str, list[GroupStats]] = {}
    fallback_cost = n * (cost.retrieve + cost.evaluate)
    for name in candidates(t):
        stats = _column_stats(dataset, name, sample_idx, sample_labels)
        stats_by_column[name] = stats
        try:
            plan = bigreedy.solve_bigreedy(stats, constraints, cost)
            costs[name] = expected_cost(plan, stats, cost)
        except InfeasibleError:
            costs[name] = fallback_cost
    chosen = min(costs, key=lambda name: (costs[name], feature_names.index(name)))
    return ColumnSelection(
        column=chosen,
        groups=tuple(stats_by_column[chosen]),
        column_costs=costs,
        sample_indices=sample_idx,
        sample_labels=sample_labels,
    )


MAX_NOMINAL_VALUES = 50


@dataclass(frozen=True)
class _FeatureEncoder:
    """Standardized numerics plus one-hot nominals, frozen at training time."""

    numeric: tuple[tuple[str, float, float], ...]  # (name, mean, std)
    nominal: tuple[tuple[str, tuple[Any, ...]], ...]  # (name, categories)

    def encode(self, dataset: Dataset) -> np.ndarray:
        blocks = []
        for name, mean, std in self.numeric:
            col = dataset.column(name).astype(float)
            blocks.append(((col - mean) / std)[:, None])
        for name, cats in self.nominal:
            col = dataset.column(name)
            blocks.append(np.stack([(col == c).astype(float) for c in cats], axis=1))
        if not blocks:
            return np.zeros((dataset.n, 0))
        return np.concatenate(blocks, axis=1)


@dataclass(frozen=True)
class VirtualColumnModel:
    """Logistic scorer plus decile bucketing usable as a correlated column.

    ``bucket_edges`` are the interior score cut points observed at training
    time (may repeat when scores tie; assignment is rank-based, so buckets
    stay equal-sized regardless).
    """

    encoder: _FeatureEncoder
    weights: np.ndarray
    intercept: float
    bucket_edges: np.ndarray
    n_buckets: int = 10

    def score(self, dataset: Dataset) -> np.ndarray:
        z = self.encoder.encode(dataset) @ self.weights + self.intercept
        return 1.0 / (1.0 + np.exp(-z))

    def bucket(self, dataset: Dataset) -> np.ndarray:
        """Equal-count bucket ids (0 = lowest scores).  Ties are broken by
        stable input order so bucket populations differ by at most one."""
        scores = self.score(dataset)
        order = np.argsort(scores, kind="stable")
        ranks = np.empty(len(scores), dtype=np.int64)
        ranks[order] = np.arange(len(scores))
        return (ranks * self.n_buckets) // len(scores)


def train_virtual_column(
    dataset: Dataset,
    sample_indices: np.ndarray,
    sample_labels: np.ndarray,
    *,
    epochs: int = 2000,
    learning_rate: float = 0.1,
    l2_penalty: float = 1e-4,
    n_buckets: int = 10,
) -> VirtualColumnModel:
    """Fit a logistic regressor on the labeled sample and freeze its decile
    bucketing over the whole table's scores.

    Features: numeric columns standardized to the sample's mean/variance,
    nominal columns with fewer than 50 distinct values one-hot encoded.
    Full-batch gradient descent, fixed epoch count, 1/sqrt(epoch) step
    decay, L2 penalty on the weights (not the intercept).
    """
    y = np.asarray(sample_labels, dtype=float)
    if len(np.unique(y)) < 2:
        raise ValueError("cannot fit classifier: sample has a single class")

    numeric = []
    nominal = []
    for col in dataset.feature_columns():
        if col.kind == NUMERIC:
            values = dataset.column(col.name).astype(float)[sample_indices]
            std = float(values.std())
            numeric.append((col.name, float(values.mean()), std if std > 0 else 1.0))
        elif dataset.distinct_count(col.name) < MAX_NOMINAL_VALUES:
            cats = tuple(np.unique(dataset.column(col.name)))
            nominal.append((col.name, cats))
    encoder = _FeatureEncoder(numeric=tuple(numeric), nominal=tuple(nominal))

    x_all = encoder.encode(dataset)
    x = x_all[sample_indices]
    m, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for epoch in range(1, epochs + 1):
        p = 1.0 / (1.0 + np.exp(-(x @ w + b)))
        err = p - y
        grad_w = x.T @ err / m + l2_penalty * w
        grad_b = float(err.mean())
        step = learning_rate / math.sqrt(epoch)
        w -= step * grad_w
        b -= step * grad_b

    scores = 1.0 / (1.0 + np.exp(-(x_all @ w + b)))
    order = np.argsort(scores, kind="stable")
    n = len(scores)
    edge_ranks = [math.ceil(i * n / n_buckets) for i in range(1, n_buckets)]
    edges = scores[order][edge_ranks]
    return VirtualColumnModel(
        encoder=encoder,
        weights=w,
        intercept=b,
        bucket_edges=edges,
        n_buckets=n_buckets,
    )
