"""Probabilistic execution engine, baselines, trial runner and sweeps.

A *trial* runs one full pipeline end to end: materialize ground truth
(fresh Bernoulli draws for synthetic specs, fixed labels for real tables),
pick the grouping column, sample labels for estimation, solve for a
strategy, then execute it with per-tuple coin flips and report realized
precision / recall / cost.  Solver infeasibility inside a trial falls back
to the universal strategy (evaluate everything) and flags the trial.

Everything is deterministic given the master seed: per-trial seeds come
from a counter-based split, and each trial consumes a single RNG stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from . import bounds, convex, estimation
from .bigreedy import solve_bigreedy
from .core import (
    Constraints,
    CostModel,
    GroupStats,
    InfeasibleError,
    RealizedCounts,
    Strategy,
    expected_cost,
    precision,
    recall,
)
from .dataset import Dataset, SyntheticSpec
from .estimation import SampleStore, SamplingScheme
from .exact import PerfectInfoGroup, solve_perfect_information

SOLVERS = (
    "exact",
    "bigreedy",
    "convex-unknown",
    "convex-independent",
    "convex-sampling",
    "naive",
)
COLUMN_POLICIES = ("fixed", "auto", "logreg")

Source = Union[Dataset, SyntheticSpec]


@dataclass(frozen=True)
class PipelineConfig:
    """Names the solver, the sampling scheme, and the grouping policy.

    ``column_policy`` is ``"fixed"`` (use the source's designated column),
    ``"fixed:<name>"``, ``"auto"`` (pick the cheapest column per trial) or
    ``"logreg"`` (learned virtual column).  ``sampling`` feeds the convex
    solvers; ``adaptive_sampling`` searches the two-third-power multiplier
    per trial instead.
    """

    solver: str
    sampling: Optional[SamplingScheme] = None
    adaptive_sampling: bool = False
    column_policy: str = "fixed"

    def __post_init__(self) -> None:
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; pick from {SOLVERS}")
        policy = self.column_policy.split(":", 1)[0]
        if policy not in COLUMN_POLICIES:
            raise ValueError(
                f"unknown column policy {self.column_policy!r}; "
                f"pick from {COLUMN_POLICIES}"
            )


@dataclass(frozen=True)
class TrialResult:
    """Realized metrics of one executed trial.

    ``retrieved_total`` / ``evaluated_total`` include estimation samples, so
    ``cost == o_r * retrieved_total + o_e * evaluated_total`` exactly.
    """

    precision: float
    recall: float
    cost: float
    counts: tuple[RealizedCounts, ...]
    retrieved_total: int
    evaluated_total: int
    seed: int
    flags: tuple[str, ...] = ()


@dataclass
class ExecutionReport:
    """Aggregate of a batch of trials plus the closed-form naive baseline."""

    strategy: Optional[Strategy]
    expected_cost: Optional[float]
    trials: list[TrialResult]
    precision_satisfaction: Optional[float]
    recall_satisfaction: Optional[float]
    baseline_name: str
    baseline_mean_cost: float
    flags: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        strategy = (
            {
                str(gid): {"R": r, "E": e}
                for gid, (r, e) in sorted(
                    self.strategy.items(), key=lambda kv: str(kv[0])
                )
            }
            if self.strategy is not None
            else None
        )
        return {
            "strategy": strategy,
            "expected_cost": self.expected_cost,
            "trials": [
                {
                    "precision": t.precision,
                    "recall": t.recall,
                    "cost": t.cost,
                    "seed": t.seed,
                }
                for t in self.trials
            ],
            "precision_satisfaction": self.precision_satisfaction,
            "recall_satisfaction": self.recall_satisfaction,
            "baseline": {
                "name": self.baseline_name,
                "mean_cost": self.baseline_mean_cost,
            },
            "flags": list(self.flags),
        }


def _counts_for_group(
    gid: Any,
    labels: np.ndarray,
    r: float,
    e: float,
    rng: np.random.Generator,
    sampled: Optional[np.ndarray],
) -> RealizedCounts:
    t = len(labels)
    coin_r = rng.random(t)
    coin_e = rng.random(t)
    live = np.ones(t, dtype=bool)
    sampled_pos = sampled_neg = 0
    if sampled is not None and len(sampled):
        live[sampled] = False
        sampled_pos = int(labels[sampled].sum())
        sampled_neg = int(len(sampled) - sampled_pos)
    retrieved = live & (coin_r < r)
    if r > 0:
        evaluated = retrieved & (coin_e < e / r)
    else:
        evaluated = np.zeros(t, dtype=bool)
    return RealizedCounts(
        group_id=gid,
        retrieved_pos=int((retrieved & labels).sum()) + sampled_pos,
        retrieved_neg=int((retrieved & ~labels).sum()) + sampled_neg,
        evaluated_pos=int((evaluated & labels).sum()) + sampled_pos,
        evaluated_neg=int((evaluated & ~labels).sum()) + sampled_neg,
        correct=int(labels.sum()),
        size=t,
    )


def execute_strategy(
    labels_by_group: Mapping[Any, np.ndarray],
    strategy: Strategy,
    cost: CostModel,
    seed: int,
    *,
    sampled_by_group: Optional[Mapping[Any, np.ndarray]] = None,
    flags: Sequence[str] = (),
) -> TrialResult:
    """Execute a strategy over the given ground truth.

    Tuples listed in ``sampled_by_group`` were already evaluated during
    estimation: correct ones are emitted unconditionally, incorrect ones
    discarded, and both are charged retrieve+evaluate.  Every other tuple is
    retrieved with probability ``R`` and, if retrieved, evaluated with
    probability ``E/R``; evaluated-incorrect tuples are dropped from the
    output.
    """
    rng = np.random.default_rng(seed)
    return _execute(labels_by_group, strategy, cost, rng, seed,
                    sampled_by_group=sampled_by_group, flags=flags)


def _execute(
    labels_by_group,
    strategy,
    cost,
    rng,
    seed,
    *,
    sampled_by_group=None,
    extra_retrieved: int = 0,
    extra_evaluated: int = 0,
    flags: Sequence[str] = (),
) -> TrialResult:
    counts = []
    for gid, labels in labels_by_group.items():
        r, e = strategy.decisions[gid]
        sampled = sampled_by_group.get(gid) if sampled_by_group else None
        counts.append(
            _counts_for_group(gid, np.asarray(labels, dtype=bool), r, e, rng, sampled)
        )
    retrieved_total = sum(c.retrieved_pos + c.retrieved_neg for c in counts) + extra_retrieved
    evaluated_total = sum(c.evaluated_pos + c.evaluated_neg for c in counts) + extra_evaluated
    run_cost = cost.retrieve * retrieved_total + cost.evaluate * evaluated_total
    return TrialResult(
        precision=precision(counts),
        recall=recall(counts),
        cost=run_cost,
        counts=tuple(counts),
        retrieved_total=retrieved_total,
        evaluated_total=evaluated_total,
        seed=seed,
        flags=tuple(flags),
    )


def naive_baseline(
    labels: np.ndarray, beta: float, cost: CostModel, seed: int
) -> TrialResult:
    """Retrieve a uniform ``ceil(beta * n)`` subset, evaluate all of it, and
    emit the correct members.  Recall is ``beta`` in expectation only."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=bool)
    n = len(labels)
    k = min(n, math.ceil(beta * n))
    picked = rng.choice(n, size=k, replace=False)
    pos = int(labels[picked].sum())
    counts = RealizedCounts(
        group_id="all",
        retrieved_pos=pos,
        retrieved_neg=k - pos,
        evaluated_pos=pos,
        evaluated_neg=k - pos,
        correct=int(labels.sum()),
        size=n,
    )
    return TrialResult(
        precision=precision([counts]),
        recall=recall([counts]),
        cost=k * (cost.retrieve + cost.evaluate),
        counts=(counts,),
        retrieved_total=k,
        evaluated_total=k,
        seed=seed,
    )


def naive_cost(n: int, beta: float, cost: CostModel) -> float:
    return min(n, math.ceil(beta * n)) * (cost.retrieve + cost.evaluate)


def _trial_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((master_seed, index)).generate_state(1)[0])


def _grouping(
    source: Source,
    config: PipelineConfig,
    constraints: Constraints,
    cost: CostModel,
    rng: np.random.Generator,
) -> tuple[dict[Any, np.ndarray], dict[Any, np.ndarray], list[str]]:
    """Resolve ground truth and grouping for one trial.

    Returns (labels per group, preloaded sampled indices per group, flags).
    Synthetic specs redraw their labels; datasets keep theirs fixed.
    """
    flags: list[str] = []
    if isinstance(source, SyntheticSpec):
        if config.column_policy != "fixed":
            raise ValueError(
                "synthetic specs have a fixed group column; materialize a "
                "dataset to use auto/logreg column policies"
            )
        return source.draw_labels(rng), {}, flags

    labels = source.labels()
    policy, _, arg = config.column_policy.partition(":")
    preloaded: dict[Any, np.ndarray] = {}
    if policy == "fixed":
        column = arg or source.correlated_column
        if not column:
            raise ValueError(
                "column policy 'fixed' needs a designated correlated column"
            )
        groups = source.group_indices(column)
    elif policy == "auto":
        selection = estimation.select_correlated_column(
            source, constraints, cost, rng=rng
        )
        flags.append(f"column={selection.column}")
        column_values = source.column(selection.column)
        groups = source.group_indices(selection.column)
        preloaded = _split_sample(
            selection.sample_indices, column_values, groups
        )
    else:  # logreg
        n = source.n
        sample_idx = rng.permutation(n)[: max(1, math.ceil(0.01 * n))]
        model = estimation.train_virtual_column(source, sample_idx, labels[sample_idx])
        buckets = model.bucket(source)
        groups = {b: np.flatnonzero(buckets == b) for b in range(model.n_buckets)}
        groups = {b: rows for b, rows in groups.items() if len(rows)}
        preloaded = _split_sample(sample_idx, buckets, groups)
        flags.append("column=virtual")
    labels_by_group = {gid: labels[rows] for gid, rows in groups.items()}
    return labels_by_group, preloaded, flags


def _split_sample(
    sample_idx: np.ndarray,
    group_of_row: np.ndarray,
    groups: Mapping[Any, np.ndarray],
) -> dict[Any, np.ndarray]:
    """Re-express table-row sample indices as within-group positions."""
    out: dict[Any, np.ndarray] = {}
    for gid, rows in groups.items():
        position = {row: i for i, row in enumerate(rows.tolist())}
        mine = [position[row] for row in sample_idx.tolist() if row in position]
        out[gid] = np.array(sorted(mine), dtype=np.int64)
    return out


def _run_trial(
    source: Source,
    config: PipelineConfig,
    constraints: Constraints,
    cost: CostModel,
    seed: int,
) -> tuple[TrialResult, Optional[Strategy], Optional[float]]:
    rng = np.random.default_rng(seed)
    flags: list[str] = []

    if config.solver == "naive":
        labels = (
            source.labels()
            if isinstance(source, Dataset)
            else np.concatenate(list(source.draw_labels(rng).values()))
        )
        k = min(len(labels), math.ceil(constraints.beta * len(labels)))
        plan = Strategy({"all": (k / len(labels), k / len(labels))})
        trial = naive_baseline(labels, constraints.beta, cost, seed)
        return trial, plan, naive_cost(len(labels), constraints.beta, cost)

    labels_by_group, preloaded, flags0 = _grouping(
        source, config, constraints, cost, rng
    )
    flags.extend(flags0)
    gids = list(labels_by_group)
    sizes = {gid: len(labels_by_group[gid]) for gid in gids}

    sampled_by_group: Optional[dict[Any, np.ndarray]] = None
    extra_retrieved = extra_evaluated = 0
    stats: Optional[list[GroupStats]] = None
    expected: Optional[float] = None

    if config.solver in ("convex-unknown", "convex-independent", "convex-sampling"):
        store = SampleStore(labels_by_group, rng, preloaded=preloaded)
        scheme = config.sampling or SamplingScheme(
            estimation.TWO_THIRD_POWER, max(2.0 * constraints.alpha, 0.1)
        )
        if config.adaptive_sampling:
            result = estimation.adaptive_num_search(store, constraints, cost)
            flags.append(f"adaptive-num={result.num:g}")
        else:
            budgets = dict(
                zip(gids, estimation.sample_budget(scheme, [sizes[g] for g in gids]))
            )
            store.extend(budgets)
        stats = store.group_stats()
        mode = (
            bounds.MODE_UNKNOWN
            if config.solver == "convex-unknown"
            else bounds.MODE_INDEPENDENT
        )
        sampling_aware = config.solver == "convex-sampling"
        try:
            strategy = convex.solve_convex(
                stats, constraints, cost, mode=mode, sampling_aware=sampling_aware
            )
        except InfeasibleError:
            strategy = Strategy.universal(gids)
            flags.append("fallback")
        expected = expected_cost(strategy, stats, cost, discount_sampled=sampling_aware)
        if sampling_aware:
            sampled_by_group = {gid: store.sampled_indices(gid) for gid in gids}
        else:
            extra_retrieved = extra_evaluated = store.total_sampled()
            expected += store.total_sampled() * (cost.retrieve + cost.evaluate)
    elif config.solver == "bigreedy":
        stats = [
            GroupStats(
                group_id=gid,
                size=sizes[gid],
                selectivity=float(np.mean(labels_by_group[gid]))
                if sizes[gid]
                else 0.0,
            )
            for gid in gids
        ]
        try:
            strategy = solve_bigreedy(stats, constraints, cost)
        except InfeasibleError:
            strategy = Strategy.universal(gids)
            flags.append("fallback")
        expected = expected_cost(strategy, stats, cost)
    elif config.solver == "exact":
        info = [
            PerfectInfoGroup(
                group_id=gid,
                correct=int(np.sum(labels_by_group[gid])),
                wrong=int(sizes[gid] - np.sum(labels_by_group[gid])),
            )
            for gid in gids
        ]
        solution = solve_perfect_information(info, constraints, cost)
        if solution is None:
            strategy = Strategy.universal(gids)
            flags.append("fallback")
        else:
            strategy = solution
        stats = [
            GroupStats(gid, sizes[gid], float(np.mean(labels_by_group[gid])))
            for gid in gids
        ]
        expected = expected_cost(strategy, stats, cost)
    else:  # pragma: no cover - guarded by PipelineConfig
        raise ValueError(config.solver)

    trial = _execute(
        labels_by_group,
        strategy,
        cost,
        rng,
        seed,
        sampled_by_group=sampled_by_group,
        extra_retrieved=extra_retrieved,
        extra_evaluated=extra_evaluated,
        flags=flags,
    )
    return trial, strategy, expected


def run_trials(
    source: Source,
    config: PipelineConfig,
    constraints: Constraints,
    cost: CostModel,
    trials: int,
    seed: int = 0,
) -> ExecutionReport:
    """Run the full pipeline ``trials`` times with independent derived seeds
    and aggregate satisfaction rates against the constraints."""
    results: list[TrialResult] = []
    strategy: Optional[Strategy] = None
    expected: Optional[float] = None
    flags: list[str] = []
    for i in range(trials):
        trial, trial_strategy, trial_expected = _run_trial(
            source, config, constraints, cost, _trial_seed(seed, i)
        )
        results.append(trial)
        if strategy is None:
            strategy, expected = trial_strategy, trial_expected
        for f in trial.flags:
            if f == "fallback":
                flags.append(f"trial {i}: fallback")
    n = source.n
    report = ExecutionReport(
        strategy=strategy,
        expected_cost=expected,
        trials=results,
        precision_satisfaction=(
            sum(t.precision >= constraints.alpha for t in results) / len(results)
            if results
            else None
        ),
        recall_satisfaction=(
            sum(t.recall >= constraints.beta for t in results) / len(results)
            if results
            else None
        ),
        baseline_name="naive",
        baseline_mean_cost=naive_cost(n, constraints.beta, cost),
        flags=flags,
    )
    return report


SWEEP_AXES = ("num", "c", "alpha", "beta")


@dataclass(frozen=True)
class SweepPoint:
    axis_value: float
    mean_cost: float
    mean_evaluations: float
    mean_retrievals: float
    trials: int
    flags: tuple[str, ...] = ()


def sweep(
    source: Source,
    axis: str,
    grid: Sequence[float],
    config: PipelineConfig,
    constraints: Constraints,
    cost: CostModel,
    trials_per_point: int,
    seed: int = 0,
) -> list[SweepPoint]:
    """One :func:`run_trials` per grid value of the chosen axis.

    ``num`` / ``c`` swap in a two-third-power / constant sampling scheme
    with that parameter; ``alpha`` / ``beta`` replace the constraint.
    Failures are recorded as flagged NaN points rather than aborting the
    sweep.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not grid:
        raise ValueError("sweep grid is empty")
    points = []
    for i, value in enumerate(grid):
        point_config = config
        point_constraints = constraints
        if axis == "num":
            point_config = PipelineConfig(
                solver=config.solver,
                sampling=SamplingScheme(estimation.TWO_THIRD_POWER, value),
                column_policy=config.column_policy,
            )
        elif axis == "c":
            point_config = PipelineConfig(
                solver=config.solver,
                sampling=SamplingScheme(estimation.CONSTANT, value),
                column_policy=config.column_policy,
            )
        elif axis == "alpha":
            point_constraints = Constraints(value, constraints.beta, constraints.rho)
        else:
            point_constraints = Constraints(constraints.alpha, value, constraints.rho)
        try:
            report = run_trials(
                source,
                point_config,
                point_constraints,
                cost,
                trials_per_point,
                seed=_trial_seed(seed, i),
            )
            trials = report.trials
            points.append(
                SweepPoint(
                    axis_value=float(value),
                    mean_cost=float(np.mean([t.cost for t in trials])),
                    mean_evaluations=float(
                        np.mean([t.evaluated_total for t in trials])
                    ),
                    mean_retrievals=float(
                        np.mean([t.retrieved_total for t in trials])
                    ),
                    trials=len(trials),
                )
            )
        except (InfeasibleError, ValueError) as exc:
            points.append(
                SweepPoint(
                    axis_value=float(value),
                    mean_cost=math.nan,
                    mean_evaluations=math.nan,
                    mean_retrievals=math.nan,
                    trials=0,
                    flags=(f"error: {exc}",),
                )
            )
    return points
