"""Command-line entry point: ``plan``, ``run``, ``sweep``, ``select-column``.

Configuration is a flat key=value file with dotted keys (see DEFAULTS);
command-line flags override file values.  Exit codes: 0 success, 1 config
validation error, 2 runtime/infeasibility error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import estimation, harness
from .core import Constraints, CostModel, InfeasibleError
from .dataset import Dataset, SyntheticSpec, load_csv
from .estimation import SamplingScheme
from .harness import PipelineConfig

DEFAULTS: dict[str, str] = {
    "alpha": "0.8",
    "beta": "0.8",
    "rho": "0.8",
    "cost.retrieve": "1",
    "cost.evaluate": "3",
    "solver": "convex-sampling",
    "column.policy": "fixed",
    "sampling.scheme": "two-third-power",
    "sampling.param": "",  # empty -> 2 * alpha
    "seed": "0",
    "trials": "50",
    "dataset.path": "",
    "dataset.label_column": "",
    "dataset.positive_value": "",
    "synthetic.sizes": "",
    "synthetic.selectivities": "",
    "synthetic.noise_columns": "0",
}

_SCHEME_NAMES = {"constant", "two-third-power", "adaptive"}


class ConfigError(Exception):
    pass


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def format_config(values: dict[str, str]) -> str:
    return "\n".join(f"{k} = {values[k]}" for k in sorted(values)) + "\n"


@dataclass
class Settings:
    """Validated, typed view of the flat configuration."""

    constraints: Constraints
    cost: CostModel
    solver: str
    column_policy: str
    sampling_scheme: str
    sampling_param: Optional[float]
    seed: int
    trials: int
    source: "Dataset | SyntheticSpec"
    raw: dict[str, str]

    def pipeline(self) -> PipelineConfig:
        adaptive = self.sampling_scheme == "adaptive"
        sampling = None
        if not adaptive:
            kind = (
                estimation.CONSTANT
                if self.sampling_scheme == "constant"
                else estimation.TWO_THIRD_POWER
            )
            param = self.sampling_param
            if param is None:
                param = max(2.0 * self.constraints.alpha, 0.1)
            sampling = SamplingScheme(kind, param)
        return PipelineConfig(
            solver=self.solver,
            sampling=sampling,
            adaptive_sampling=adaptive,
            column_policy=self.column_policy,
        )


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}")


def build_settings(values: dict[str, str]) -> Settings:
    def fnum(key: str) -> float:
        try:
            return float(values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {values[key]!r}")

    def inum(key: str) -> int:
        try:
            return int(values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {values[key]!r}")

    try:
        constraints = Constraints(fnum("alpha"), fnum("beta"), fnum("rho"))
        cost = CostModel(fnum("cost.retrieve"), fnum("cost.evaluate"))
    except ValueError as exc:
        raise ConfigError(str(exc))

    solver = values["solver"]
    if solver not in harness.SOLVERS:
        raise ConfigError(f"solver: unknown name {solver!r}; pick from {harness.SOLVERS}")
    policy = values["column.policy"]
    if policy.split(":", 1)[0] not in harness.COLUMN_POLICIES:
        raise ConfigError(f"column.policy: unknown policy {policy!r}")
    scheme = values["sampling.scheme"]
    if scheme not in _SCHEME_NAMES:
        raise ConfigError(
            f"sampling.scheme: unknown scheme {scheme!r}; pick from {sorted(_SCHEME_NAMES)}"
        )
    param = float(values["sampling.param"]) if values["sampling.param"] else None
    if param is not None and param <= 0:
        raise ConfigError("sampling.param: must be > 0")

    has_dataset = bool(values["dataset.path"])
    has_synthetic = bool(values["synthetic.sizes"])
    if has_dataset == has_synthetic:
        raise ConfigError("exactly one of dataset.path or synthetic.sizes is required")
    if has_dataset:
        if not values["dataset.label_column"]:
            raise ConfigError("dataset.label_column is required with dataset.path")
        column = None
        if policy.startswith("fixed:"):
            column = policy.split(":", 1)[1]
        try:
            source: Dataset | SyntheticSpec = load_csv(
                values["dataset.path"],
                values["dataset.label_column"],
                values["dataset.positive_value"],
                correlated_column=column,
            )
        except (OSError, ValueError) as exc:
            raise ConfigError(f"dataset.path: {exc}")
        if values["dataset.label_column"] not in source.cells:
            raise ConfigError(
                f"dataset.label_column: no column named "
                f"{values['dataset.label_column']!r}"
            )
    else:
        sizes = _floats(values["synthetic.sizes"], "synthetic.sizes")
        sels = _floats(values["synthetic.selectivities"], "synthetic.selectivities")
        try:
            source = SyntheticSpec(
                sizes=tuple(int(t) for t in sizes),
                selectivities=sels,
                noise_columns=inum("synthetic.noise_columns"),
                seed=inum("seed"),
            )
        except ValueError as exc:
            raise ConfigError(f"synthetic: {exc}")

    return Settings(
        constraints=constraints,
        cost=cost,
        solver=solver,
        column_policy=policy,
        sampling_scheme=scheme,
        sampling_param=param,
        seed=inum("seed"),
        trials=inum("trials"),
        source=source,
        raw=dict(values),
    )


def parse_grid(text: str) -> list[float]:
    """Accept ``a,b,c`` lists or inclusive ranges ``start..stop:step`` /
    ``start..stop step s``."""
    text = text.strip()
    if not text:
        raise ConfigError("grid: empty")
    if ".." in text:
        start_s, _, rest = text.partition("..")
        rest = rest.replace(" step ", ":").replace("step ", ":")
        stop_s, _, step_s = rest.partition(":")
        if not step_s:
            raise ConfigError("grid: range form is start..stop:step")
        try:
            start, stop, step = float(start_s), float(stop_s), float(step_s)
        except ValueError:
            raise ConfigError(f"grid: bad range {text!r}")
        if step <= 0 or stop < start:
            raise ConfigError("grid: need step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"grid: expected numbers, got {text!r}")
    if not grid:
        raise ConfigError("grid: empty")
    return grid


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, per contract
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


_FLAG_TO_KEY = {
    "alpha": "alpha",
    "beta": "beta",
    "rho": "rho",
    "cost_retrieve": "cost.retrieve",
    "cost_evaluate": "cost.evaluate",
    "solver": "solver",
    "column_policy": "column.policy",
    "sampling_scheme": "sampling.scheme",
    "sampling_param": "sampling.param",
    "trials": "trials",
    "dataset": "dataset.path",
    "label_column": "dataset.label_column",
    "positive_value": "dataset.positive_value",
    "synthetic_sizes": "synthetic.sizes",
    "synthetic_selectivities": "synthetic.selectivities",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", metavar="PATH")
    parser.add_argument("--print-config", action="store_true")
    parser.add_argument("--alpha")
    parser.add_argument("--beta")
    parser.add_argument("--rho")
    parser.add_argument("--cost-retrieve")
    parser.add_argument("--cost-evaluate")
    parser.add_argument("--solver")
    parser.add_argument("--column-policy")
    parser.add_argument("--sampling-scheme")
    parser.add_argument("--sampling-param")
    parser.add_argument("--trials")
    parser.add_argument("--dataset")
    parser.add_argument("--label-column")
    parser.add_argument("--positive-value")
    parser.add_argument("--synthetic-sizes")
    parser.add_argument("--synthetic-selectivities")


def _effective_config(args: argparse.Namespace) -> dict[str, str]:
    values = dict(DEFAULTS)
    if args.config:
        try:
            values.update(parse_config_file(args.config))
        except OSError as exc:
            raise ConfigError(str(exc))
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = str(value)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    return values


def _emit(text: str, out: Optional[str], summary: str = "") -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        if summary:
            print(summary)
    else:
        sys.stdout.write(text)


def cmd_plan(settings: Settings) -> int:
    if settings.solver == "naive":
        n = settings.source.n
        k = min(n, math.ceil(settings.constraints.beta * n))
        payload = {
            "strategy": {"all": {"R": k / n, "E": k / n}},
            "expected_cost": harness.naive_cost(n, settings.constraints.beta, settings.cost),
        }
    else:
        trial, strategy, expected = harness._run_trial(
            settings.source,
            settings.pipeline(),
            settings.constraints,
            settings.cost,
            harness._trial_seed(settings.seed, 0),
        )
        payload = {
            "strategy": {
                str(gid): {"R": r, "E": e}
                for gid, (r, e) in sorted(strategy.items(), key=lambda kv: str(kv[0]))
            },
            "expected_cost": expected,
            "flags": list(trial.flags),
        }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_run(settings: Settings, out: Optional[str]) -> int:
    report = harness.run_trials(
        settings.source,
        settings.pipeline(),
        settings.constraints,
        settings.cost,
        settings.trials,
        seed=settings.seed,
    )
    text = json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    mean_cost = (
        float(np.mean([t.cost for t in report.trials])) if report.trials else math.nan
    )
    _emit(
        text,
        out,
        summary=(
            f"{len(report.trials)} trials, mean cost {mean_cost:.1f}, "
            f"precision satisfaction {report.precision_satisfaction}, "
            f"recall satisfaction {report.recall_satisfaction}"
        ),
    )
    return 0


def cmd_sweep(settings: Settings, axis: str, grid: list[float], out: Optional[str]) -> int:
    points = harness.sweep(
        settings.source,
        axis,
        grid,
        settings.pipeline(),
        settings.constraints,
        settings.cost,
        settings.trials,
        seed=settings.seed,
    )
    lines = ["axis,mean_cost,mean_evaluations,mean_retrievals,trials"]
    for p in points:
        lines.append(
            f"{p.axis_value:g},{p.mean_cost:.6g},{p.mean_evaluations:.6g},"
            f"{p.mean_retrievals:.6g},{p.trials}"
        )
    _emit("\n".join(lines) + "\n", out, summary=f"{len(points)} sweep points")
    return 0


def cmd_select_column(settings: Settings) -> int:
    if not isinstance(settings.source, Dataset):
        raise ConfigError("select-column needs dataset.path (a real table)")
    rng = np.random.default_rng(settings.seed)
    if settings.column_policy == "logreg":
        labels = settings.source.labels()
        n = settings.source.n
        sample_idx = rng.permutation(n)[: max(1, math.ceil(0.01 * n))]
        model = estimation.train_virtual_column(
            settings.source, sample_idx, labels[sample_idx]
        )
        buckets = model.bucket(settings.source)
        tallies = {}
        for b in range(model.n_buckets):
            rows = np.flatnonzero(buckets == b)
            mine = np.intersect1d(rows, sample_idx)
            s, _ = estimation.beta_posterior(
                estimation.SampleTally(len(mine), int(labels[mine].sum()))
            )
            tallies[str(b)] = {"size": int(len(rows)), "selectivity": s}
        payload = {
            "column": "virtual",
            "bucket_edges": [float(x) for x in model.bucket_edges],
            "groups": tallies,
        }
    else:
        selection = estimation.select_correlated_column(
            settings.source, settings.constraints, settings.cost, rng=rng
        )
        payload = {
            "column": selection.column,
            "sampled": int(len(selection.sample_indices)),
            "column_costs": {k: float(v) for k, v in selection.column_costs.items()},
            "groups": {
                str(g.group_id): {
                    "size": g.size,
                    "selectivity": g.selectivity,
                    "variance": g.variance,
                }
                for g in selection.groups
            },
        }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _Parser(prog="apxsel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("plan", "run", "select-column"):
        p = sub.add_parser(name)
        _add_common(p)
    p_sweep = sub.add_parser("sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    p_sweep.add_argument("--grid", required=True)

    args = parser.parse_args(argv)
    try:
        values = _effective_config(args)
        if args.print_config:
            sys.stdout.write(format_config(values))
            return 0
        settings = build_settings(values)
        if args.command == "plan":
            return cmd_plan(settings)
        if args.command == "run":
            return cmd_run(settings, args.out)
        if args.command == "sweep":
            return cmd_sweep(settings, args.axis, parse_grid(args.grid), args.out)
        return cmd_select_column(settings)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InfeasibleError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
