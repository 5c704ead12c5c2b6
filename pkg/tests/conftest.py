import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from apxsel.core import Constraints, CostModel, GroupStats

DEFAULT_COST = CostModel(retrieve=1.0, evaluate=3.0)


@pytest.fixture
def default_cost():
    return DEFAULT_COST


def three_tier_groups(scale: int = 1):
    """Three groups of 1000*scale tuples at selectivities 0.9 / 0.5 / 0.1."""
    return [
        GroupStats("g0", 1000 * scale, 0.9),
        GroupStats("g1", 1000 * scale, 0.5),
        GroupStats("g2", 1000 * scale, 0.1),
    ]


def random_feasible_instance(rng: np.random.Generator):
    """One random known-selectivity instance passing the greedy precheck.

    Matches the acceptance sampling ranges: up to 3 groups, sizes in
    [100, 2000], selectivities in [0.05, 0.95], alpha/beta in [0.3, 0.9],
    rho fixed at 0.8.
    """
    from apxsel.bigreedy import check_feasibility

    while True:
        m = int(rng.integers(1, 4))
        groups = [
            GroupStats(
                f"g{i}",
                int(rng.integers(100, 2001)),
                float(rng.uniform(0.05, 0.95)),
            )
            for i in range(m)
        ]
        constraints = Constraints(
            alpha=float(rng.uniform(0.3, 0.9)),
            beta=float(rng.uniform(0.3, 0.9)),
            rho=0.8,
        )
        if check_feasibility(groups, constraints).ok:
            return groups, constraints
