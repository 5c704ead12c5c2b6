"""Two-pass greedy solver: worked traces, structure, and oracle parity."""

import math

import numpy as np
import pytest

from apxsel.bigreedy import check_feasibility, solve_bigreedy, tightness_gap
from apxsel.bounds import hoeffding_thresholds, precision_margin, recall_margin
from apxsel.core import Constraints, CostModel, GroupStats, InfeasibleError, expected_cost
from apxsel.exact import grid_oracle

from conftest import DEFAULT_COST, random_feasible_instance, three_tier_groups

TIGHT = 1e-9


class TestFeasibilityCheck:
    def test_boundary_selectivity_fails_headroom(self):
        # Top selectivity exactly at alpha leaves no positive headroom.
        report = check_feasibility(three_tier_groups(), Constraints(0.9, 0.9, 0.9))
        assert not report.precision_ok
        assert report.precision_slack < 0
        assert report.recall_ok

    def test_headroom_grows_with_size(self):
        small = [GroupStats("g0", 1000, 0.95), GroupStats("g1", 1000, 0.5),
                 GroupStats("g2", 1000, 0.1)]
        report = check_feasibility(small, Constraints(0.9, 0.9, 0.9))
        assert not report.precision_ok  # 50 of headroom vs h_p ~ 58.8

        big = [GroupStats("g0", 10000, 0.95), GroupStats("g1", 1000, 0.5),
               GroupStats("g2", 1000, 0.1)]
        report = check_feasibility(big, Constraints(0.9, 0.9, 0.9))
        assert report.precision_ok  # 500 of headroom vs h_p ~ 117.6
        assert report.ok

    def test_beta_one_always_fails_for_positive_rho(self):
        # At beta = 1 the attainable-side sum is exactly 0, so the strict
        # inequality can never hold.
        groups = three_tier_groups()
        report = check_feasibility(groups, Constraints(0.5, 1.0, 0.5))
        assert not report.recall_ok
        assert report.recall_slack <= 0


class TestGreedySolve:
    def test_worked_trace_with_injected_thresholds(self):
        groups = three_tier_groups()
        cons = Constraints(0.9, 0.9, 0.9)
        th = hoeffding_thresholds(3000, cons.beta, cons.rho)
        strategy = solve_bigreedy(
            groups, cons, DEFAULT_COST, thresholds=th, precheck=False
        )
        assert strategy.retrieve("g0") == 1.0
        assert strategy.retrieve("g1") == pytest.approx(0.93717, abs=1e-4)
        assert strategy.retrieve("g2") == 0.0
        assert strategy.evaluate("g1") == pytest.approx(strategy.retrieve("g1"))
        assert strategy.evaluate("g0") == pytest.approx(0.13235, abs=1e-4)
        assert expected_cost(strategy, groups, DEFAULT_COST) == pytest.approx(
            5145.7, abs=0.1
        )
        # both thresholded constraints met exactly at the fill points
        assert precision_margin(strategy, groups, cons.alpha) >= th.precision_slack - TIGHT
        assert recall_margin(strategy, groups, cons.beta) >= th.recall_slack - TIGHT

    def test_precheck_failure_raises(self):
        with pytest.raises(InfeasibleError, match="precheck"):
            solve_bigreedy(three_tier_groups(), Constraints(0.9, 0.9, 0.9), DEFAULT_COST)

    def test_zero_thresholds_zero_constraints_give_zero_strategy(self):
        groups = three_tier_groups()
        strategy = solve_bigreedy(
            groups, Constraints(0.0, 0.0, 0.0), DEFAULT_COST, precheck=False
        )
        assert all(re == (0.0, 0.0) for re in strategy.decisions.values())

    def test_pure_group_needs_no_evaluation(self):
        groups = [GroupStats("pure", 100_000, 1.0)]
        cons = Constraints(0.9, 0.9, 0.8)
        strategy = solve_bigreedy(groups, cons, DEFAULT_COST)
        assert strategy.evaluate("pure") == 0.0
        assert 0.9 < strategy.retrieve("pure") <= 1.0

    def test_margins_hold_on_random_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            groups, cons = random_feasible_instance(rng)
            strategy = solve_bigreedy(groups, cons, DEFAULT_COST)
            th = hoeffding_thresholds(sum(g.size for g in groups), cons.beta, cons.rho)
            assert precision_margin(strategy, groups, cons.alpha) >= th.precision_slack - TIGHT
            assert recall_margin(strategy, groups, cons.beta) >= th.recall_slack - TIGHT

    def test_structure_of_output(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            groups, cons = random_feasible_instance(rng)
            strategy = solve_bigreedy(groups, cons, DEFAULT_COST)
            by_sel = sorted(groups, key=lambda g: -g.selectivity)
            rs = [strategy.retrieve(g.group_id) for g in by_sel]
            es = [strategy.evaluate(g.group_id) for g in by_sel]
            assert sum(1 for r in rs if 0 < r < 1) <= 1
            assert sum(1 for r, e in zip(rs, es) if 0 < e < r) <= 1
            # retrieval is a prefix in selectivity order
            seen_fractional = False
            for r in rs:
                if seen_fractional:
                    assert r == 0.0
                if r < 1.0:
                    seen_fractional = True
            # evaluation saturates the lowest-selectivity retrieved groups:
            # walking upward, once E drops below R all later E are zero
            retrieved = [(r, e) for r, e in zip(rs, es) if r > 0]
            hit_partial = False
            for r, e in reversed(retrieved):  # ascending selectivity
                if hit_partial:
                    assert e == pytest.approx(0.0, abs=TIGHT)
                if e < r - TIGHT:
                    hit_partial = True
            # recall constraint tight unless everything is retrieved
            th = hoeffding_thresholds(sum(g.size for g in groups), cons.beta, cons.rho)
            if any(r < 1.0 for r in rs):
                assert recall_margin(strategy, groups, cons.beta) == pytest.approx(
                    th.recall_slack, abs=1e-9 * max(1, sum(g.size for g in groups))
                )

    def test_cost_within_grid_slack_of_oracle(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            groups, cons = random_feasible_instance(rng)
            strategy = solve_bigreedy(groups, cons, DEFAULT_COST)
            mine = expected_cost(strategy, groups, DEFAULT_COST)
            oracle = grid_oracle(groups, cons, DEFAULT_COST, 200)
            assert oracle is not None
            slack = sum(g.size for g in groups) * 4 / 200
            assert mine <= oracle.cost + slack


class TestTightnessGap:
    def test_worked_value(self):
        gap = tightness_gap(three_tier_groups(), Constraints(0.9, 0.9, 0.9), DEFAULT_COST)
        assert gap == pytest.approx(28536, rel=0.001)

    def test_symmetric_at_half(self):
        groups = three_tier_groups()
        cons = Constraints(0.6, 0.7, 0.5)
        ours = hoeffding_thresholds(3000, cons.beta, 0.5)
        gap = tightness_gap(groups, cons, DEFAULT_COST)
        expect = (
             4.0 / 0.1 * max(
                2 * ours.recall_slack, 2 * ours.precision_slack / (1 - cons.alpha)
            )
        )
        assert gap == pytest.approx(expect)

    def test_scales_with_sqrt_of_size(self):
        cons = Constraints(0.8, 0.8, 0.7)
        small = tightness_gap(three_tier_groups(), cons, DEFAULT_COST)
        doubled = tightness_gap(three_tier_groups(scale=2), cons, DEFAULT_COST)
        assert doubled == pytest.approx(small * math.sqrt(2), rel=1e-9)

    def test_alpha_one_rejected(self):
        with pytest.raises(ValueError, match="alpha=1"):
            tightness_gap(three_tier_groups(), Constraints(1.0, 0.5, 0.5), DEFAULT_COST)

    def test_rho_zero_is_unbounded(self):
        assert tightness_gap(
            three_tier_groups(), Constraints(0.5, 0.5, 0.0), DEFAULT_COST
        ) == math.inf

    def test_bounds_actual_gap_to_oracle(self):
        rng = np.random.default_rng(37)
        for _ in range(8):
            groups, cons = random_feasible_instance(rng)
            strategy = solve_bigreedy(groups, cons, DEFAULT_COST)
            oracle = grid_oracle(groups, cons, DEFAULT_COST, 200)
            gap = tightness_gap(groups, cons, DEFAULT_COST)
            assert (
                expected_cost(strategy, groups, DEFAULT_COST) - oracle.cost <= gap
            )
