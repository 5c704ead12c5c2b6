"""Tabular dataset model, CSV ingestion, and synthetic table generation.

The predicate being approximated is simulated by a hidden label column:
reading any other column is free, revealing a label is the expensive
operation that execution engines pay for.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Dataset:
    """Immutable column-typed table with a designated label column.

    ``positive_label`` defines the mapping: a row is correct iff its label
    cell equals it; every other value counts as negative.
    """

    columns: tuple[Column, ...]
    cells: Mapping[str, np.ndarray]
    label_column: str
    positive_label: Any
    correlated_column: Optional[str] = None

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        if set(self.cells) != set(names):
            raise ValueError("cells do not match declared columns")
        lengths = {len(v) for v in self.cells.values()}
        if len(lengths) > 1:
            raise ValueError("columns have unequal lengths")
        if self.label_column not in self.cells:
            raise ValueError(f"label column {self.label_column!r} not in dataset")
        if self.correlated_column is not None and self.correlated_column not in self.cells:
            raise ValueError(
                f"correlated column {self.correlated_column!r} not in dataset"
            )

    @property
    def n(self) -> int:
        return len(self.cells[self.label_column])

    def column(self, name: str) -> np.ndarray:
        return self.cells[name]

    def column_kind(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise KeyError(name)

    def labels(self) -> np.ndarray:
        """Boolean predicate values (True = correct tuple)."""
        return np.asarray(self.cells[self.label_column] == self.positive_label)

    def distinct_count(self, name: str) -> int:
        return len(np.unique(self.cells[name]))

    def feature_columns(self) -> list[Column]:
        return [c for c in self.columns if c.name != self.label_column]

    def group_indices(self, column: str) -> dict[Any, np.ndarray]:
        """Row indices per distinct value of ``column``, keys sorted."""
        values = self.cells[column]
        keys, inverse = np.unique(values, return_inverse=True)
        return {key: np.flatnonzero(inverse == i) for i, key in enumerate(keys)}


def _infer_kind(raw: list[str]) -> str:
    try:
        for v in raw:
            float(v)
    except ValueError:
        return CATEGORICAL
    return NUMERIC


def load_csv(
    path: str,
    label_column: str,
    positive_label: str,
    correlated_column: Optional[str] = None,
) -> Dataset:
    """Load a header-rowed CSV, typing each column numeric when every cell
    parses as a decimal number and categorical otherwise."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"{path}: ragged row of width {len(row)}")
    columns = []
    cells: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in rows]
        kind = _infer_kind(raw)
        if kind == NUMERIC and name != label_column:
            cells[name] = np.array([float(v) for v in raw])
        else:
            kind = CATEGORICAL if name == label_column else kind
            cells[name] = np.array(raw, dtype=object)
        columns.append(Column(name, kind))
    return Dataset(
        columns=tuple(columns),
        cells=cells,
        label_column=label_column,
        positive_label=positive_label,
        correlated_column=correlated_column,
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic grouped table.

    Labels are drawn per tuple as independent Bernoulli trials with the
    group's selectivity, deterministically from ``seed``.
    """

    sizes: tuple[int, ...]
    selectivities: tuple[float, ...]
    noise_columns: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.sizes) != len(self.selectivities) or not self.sizes:
            raise ValueError("sizes and selectivities must be equal-length, nonempty")
        if any(t < 1 for t in self.sizes):
            raise ValueError("group sizes must be >= 1")
        if any(not 0.0 <= s <= 1.0 for s in self.selectivities):
            raise ValueError("selectivities must be in [0, 1]")

    @property
    def n(self) -> int:
        return int(sum(self.sizes))

    def group_ids(self) -> list[str]:
        return [f"g{i}" for i in range(len(self.sizes))]

    def draw_labels(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Fresh per-group boolean labels, one Bernoulli draw per tuple."""
        return {
            gid: rng.random(t) < s
            for gid, t, s in zip(self.group_ids(), self.sizes, self.selectivities)
        }


GROUP_COLUMN = "group"
LABEL_COLUMN = "label"
POSITIVE = "pos"
NEGATIVE = "neg"


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Materialize a spec into a table: one categorical group column, the
    Bernoulli label column, and any requested numeric noise columns."""
    rng = np.random.default_rng(spec.seed)
    groups: list[str] = []
    for gid, t in zip(spec.group_ids(), spec.sizes):
        groups.extend([gid] * t)
    labels_by_group = spec.draw_labels(rng)
    labels = np.concatenate([labels_by_group[gid] for gid in spec.group_ids()])
    columns = [Column(GROUP_COLUMN, CATEGORICAL), Column(LABEL_COLUMN, CATEGORICAL)]
    cells: dict[str, np.ndarray] = {
        GROUP_COLUMN: np.array(groups, dtype=object),
        LABEL_COLUMN: np.array(
            [POSITIVE if x else NEGATIVE for x in labels], dtype=object
        ),
    }
    for i in range(spec.noise_columns):
        name = f"noise{i}"
        columns.append(Column(name, NUMERIC))
        cells[name] = rng.standard_normal(spec.n)
    return Dataset(
        columns=tuple(columns),
        cells=cells,
        label_column=LABEL_COLUMN,
        positive_label=POSITIVE,
        correlated_column=GROUP_COLUMN,
    )


def correlated_groups_spec(
    n: int = 50_000,
    num_groups: int = 7,
    overall_selectivity: float = 0.72,
    selectivity_spread: float = 0.13,
    high_selectivity: float = 0.82,
    high_groups: int = 5,
    seed: int = 0,
) -> SyntheticSpec:
    """A loan-book-shaped synthetic: a strongly predictive group column.

    Two selectivity tiers: ``high_groups`` groups sit at ``high_selectivity``
    and the rest at the low value implied by ``selectivity_spread`` (the
    unweighted standard deviation across groups).  Tier sizes are then
    pinned by ``overall_selectivity``, the size-weighted mean.
    """
    k = high_groups
    j = num_groups - k
    if k < 1 or j < 1:
        raise ValueError("need at least one group in each tier")
    low = high_selectivity - selectivity_spread * num_groups / math.sqrt(k * j)
    if not 0.0 <= low < high_selectivity <= 1.0:
        raise ValueError("spread pushes the low tier outside [0, 1]")
    if not low < overall_selectivity < high_selectivity:
        raise ValueError("overall selectivity must sit between the tiers")
    total_high = n * (overall_selectivity - low) / (high_selectivity - low)
    high_size = int(total_high / k)
    low_size = int((n - high_size * k) / j)
    sizes = [low_size] * j + [high_size] * k
    sizes[0] += n - sum(sizes)
    sel = [low] * j + [high_selectivity] * k
    return SyntheticSpec(
        sizes=tuple(sizes),
        selectivities=tuple(sel),
        seed=seed,
    )
