"""Exact boolean solver and grid oracles."""

import numpy as np
import pytest

from apxsel.bounds import Thresholds, hoeffding_thresholds
from apxsel.core import Constraints, CostModel, GroupStats
from apxsel.exact import (
    PerfectInfoGroup,
    feasible_grid_minimum,
    grid_oracle,
    solve_perfect_information,
)

from conftest import DEFAULT_COST, three_tier_groups
from oracles import boolean_assignment_minimum, min_knapsack_cover

TABLE = [
    PerfectInfoGroup(1, correct=4, wrong=0),
    PerfectInfoGroup(2, correct=1, wrong=2),
    PerfectInfoGroup(3, correct=1, wrong=4),
]


def solver_cost(groups, strategy, cost):
    return sum(
        g.size * (cost.retrieve * strategy.retrieve(g.group_id)
                  + cost.evaluate * strategy.evaluate(g.group_id))
        for g in groups
    )


class TestPerfectInformation:
    def test_worked_table_optimum(self):
        strategy = solve_perfect_information(TABLE, Constraints(0.8, 0.8, 0.0), DEFAULT_COST)
        assert strategy.decisions == {1: (1.0, 0.0), 2: (1.0, 1.0), 3: (0.0, 0.0)}
        assert solver_cost(TABLE, strategy, DEFAULT_COST) == pytest.approx(16.0)

    def test_agrees_with_independent_enumeration(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            m = int(rng.integers(1, 6))
            counts = rng.integers(0, 30, size=(m, 2))
            groups = [
                PerfectInfoGroup(i, int(c), int(w))
                for i, (c, w) in enumerate(counts)
                if c + w > 0
            ] or [PerfectInfoGroup(0, 1, 1)]
            cons = Constraints(
                float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), 0.0
            )
            got = solve_perfect_information(groups, cons, DEFAULT_COST)
            want = boolean_assignment_minimum(
                [g.correct for g in groups],
                [g.wrong for g in groups],
                cons.alpha,
                cons.beta,
                DEFAULT_COST.retrieve,
                DEFAULT_COST.evaluate,
            )
            assert got is not None and want is not None
            assert solver_cost(groups, got, DEFAULT_COST) == pytest.approx(want[0])

    def test_output_satisfies_constraints(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            counts = rng.integers(0, 50, size=(4, 2))
            groups = [
                PerfectInfoGroup(i, int(c), int(w))
                for i, (c, w) in enumerate(counts)
                if c + w > 0
            ] or [PerfectInfoGroup(0, 2, 2)]
            alpha, beta = rng.uniform(0.1, 0.95, 2)
            strategy = solve_perfect_information(
                groups, Constraints(float(alpha), float(beta), 0.0), DEFAULT_COST
            )
            recall_lhs = sum(
                g.correct * strategy.retrieve(g.group_id) for g in groups
            )
            assert recall_lhs >= beta * sum(g.correct for g in groups) - 1e-9
            prec_lhs = sum(
                ((1 - alpha) * g.correct - alpha * g.wrong) * strategy.retrieve(g.group_id)
                + alpha * g.wrong * strategy.evaluate(g.group_id)
                for g in groups
            )
            assert prec_lhs >= -1e-9

    def test_cost_monotone_in_constraints(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            groups = [
                PerfectInfoGroup(i, int(rng.integers(1, 40)), int(rng.integers(0, 40)))
                for i in range(4)
            ]
            a1, a2 = sorted(rng.uniform(0.1, 0.9, 2))
            b1, b2 = sorted(rng.uniform(0.1, 0.9, 2))
            lo = solve_perfect_information(groups, Constraints(a1, b1, 0.0), DEFAULT_COST)
            hi = solve_perfect_information(groups, Constraints(a2, b2, 0.0), DEFAULT_COST)
            assert solver_cost(groups, hi, DEFAULT_COST) >= solver_cost(
                groups, lo, DEFAULT_COST
            ) - 1e-9

    def test_knapsack_special_case(self):
        # Without a precision constraint the problem is a minimum cover of
        # beta * (total correct).
        rng = np.random.default_rng(31)
        for _ in range(15):
            m = int(rng.integers(2, 11))
            groups = [
                PerfectInfoGroup(i, int(rng.integers(1, 25)), int(rng.integers(0, 25)))
                for i in range(m)
            ]
            beta = float(rng.uniform(0.2, 0.95))
            strategy = solve_perfect_information(
                groups, Constraints(0.0, beta, 0.0), CostModel(1.0, 3.0)
            )
            got = solver_cost(groups, strategy, CostModel(1.0, 3.0))
            want = min_knapsack_cover(
                [g.correct for g in groups], [g.size for g in groups], beta, 1.0
            )
            assert got == pytest.approx(want)

    def test_zero_constraints_discard_everything(self):
        strategy = solve_perfect_information(TABLE, Constraints(0.0, 0.0, 0.0), DEFAULT_COST)
        assert all(re == (0.0, 0.0) for re in strategy.decisions.values())

    def test_perfect_constraints_evaluate_everything(self):
        strategy = solve_perfect_information(TABLE, Constraints(1.0, 1.0, 0.0), DEFAULT_COST)
        assert strategy is not None
        recall_lhs = sum(g.correct * strategy.retrieve(g.group_id) for g in TABLE)
        assert recall_lhs == sum(g.correct for g in TABLE)

    def test_size_cap(self):
        groups = [PerfectInfoGroup(i, 1, 1) for i in range(17)]
        with pytest.raises(ValueError, match="too large"):
            solve_perfect_information(groups, Constraints(0.5, 0.5, 0.0), DEFAULT_COST)


class TestGridOracle:
    def test_matches_brute_force_on_small_grids(self):
        from apxsel.bounds import precision_margin, recall_margin
        from apxsel.core import Strategy

        rng = np.random.default_rng(2)
        for _ in range(12):
            m = int(rng.integers(1, 3))
            groups = [
                GroupStats(i, int(rng.integers(50, 800)), float(rng.uniform(0.1, 0.9)))
                for i in range(m)
            ]
            cons = Constraints(
                float(rng.uniform(0.3, 0.8)), float(rng.uniform(0.3, 0.8)), 0.6
            )
            q = int(rng.integers(4, 11))
            milp = grid_oracle(groups, cons, DEFAULT_COST, q)
            th = hoeffding_thresholds(sum(g.size for g in groups), cons.beta, cons.rho)

            def feasible(rr, ee):
                t = np.array([g.size for g in groups], float)[:, None]
                s = np.array([g.selectivity for g in groups], float)[:, None]
                a, b = cons.alpha, cons.beta
                margin_p = (t * s * (1 - a) * rr + t * (1 - s) * a * (ee - rr)).sum(0)
                margin_r = (t * s * rr).sum(0) - b * float(np.sum(t * s))
                return (margin_p >= th.precision_slack) & (margin_r >= th.recall_slack)

            brute = feasible_grid_minimum(groups, DEFAULT_COST, q, feasible)
            assert (milp is None) == (brute is None)
            if milp is not None:
                assert milp.cost == pytest.approx(brute.cost, abs=1e-6)

    def test_three_tier_q200_near_continuous_optimum(self):
        groups = three_tier_groups()
        cons = Constraints(0.9, 0.9, 0.9)
        solution = grid_oracle(groups, cons, DEFAULT_COST, 200)
        slack = sum(g.size for g in groups) * 4 / 200
        assert solution is not None
        assert abs(solution.cost - 5145.7) <= slack

    def test_resolution_one_matches_boolean_solver(self):
        groups = [
            GroupStats(g.group_id, g.size, g.correct / g.size) for g in TABLE
        ]
        cons = Constraints(0.8, 0.8, 0.0)
        solution = grid_oracle(
            groups, cons, DEFAULT_COST, 1, thresholds=Thresholds(0.0, 0.0, 1.0)
        )
        assert solution is not None
        assert solution.cost == pytest.approx(16.0)

    def test_infeasible_returns_none(self):
        groups = [GroupStats("g", 10, 0.5)]
        cons = Constraints(0.8, 0.8, 0.0)
        out = grid_oracle(
            groups, cons, DEFAULT_COST, 10, thresholds=Thresholds(1e9, 1e9, 1.0)
        )
        assert out is None

    def test_limits(self):
        groups = [GroupStats(i, 10, 0.5) for i in range(4)]
        with pytest.raises(ValueError, match="groups"):
            grid_oracle(groups, Constraints(0.5, 0.5, 0.5), DEFAULT_COST, 10)
        with pytest.raises(ValueError, match="resolution"):
            grid_oracle(groups[:2], Constraints(0.5, 0.5, 0.5), DEFAULT_COST, 500)
