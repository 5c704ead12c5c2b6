"""Solvers for the estimated-selectivity convex programs.

When selectivities are only estimated (mean ``s_a``, variance ``v_a``), the
margin constraints become: expected margin >= ``e_rho`` times a deviation
bound, with the bound shape chosen by the correlation assumption between
group estimates (see :mod:`apxsel.bounds`).  ``sampling_aware`` switches to
the sunk-sample accounting: tuples already evaluated while estimating are
charged once, their positives are emitted for free, and all probabilistic
terms run over the ``t_a - F_a`` remaining tuples.

The optimizer is a projected first-order descent on the cost objective with
a quadratic penalty on constraint violation (the penalized objective is
convex: margins are linear, deviation bounds convex), followed by a
feasibility-restoration pass that moves the iterate along the segment
toward the universal point ``R = E = 1`` until both constraints hold
exactly.  Restoration can fail only when even the universal point violates
the bounds, in which case the instance is reported infeasible-by-bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import bounds
from .bigreedy import solve_bigreedy
from .core import Constraints, CostModel, GroupStats, InfeasibleError, Strategy


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 5000
    kkt_tolerance: float = 1e-6
    feasibility_margin: float = 1e-6

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.kkt_tolerance <= 0 or self.feasibility_margin < 0:
            raise ValueError("tolerances must be positive")


class _Program:
    """Vectorized margins, deviation bounds and gradients for one instance."""

    def __init__(
        self,
        groups: Sequence[GroupStats],
        constraints: Constraints,
        cost: CostModel,
        mode: str,
        sampling_aware: bool,
    ):
        self.mode = mode
        self.alpha = constraints.alpha
        self.beta = constraints.beta
        self.e_rho = bounds.chebyshev_factor(constraints.rho)
        full = np.array([g.size for g in groups], dtype=float)
        sampled = np.array([g.sampled for g in groups], dtype=float)
        self.t = full - sampled if sampling_aware else full
        self.s = np.array([g.selectivity for g in groups], dtype=float)
        self.v = np.array([g.variance for g in groups], dtype=float)
        self.f_pos = (
            np.array([g.sampled_positive for g in groups], dtype=float)
            if sampling_aware
            else np.zeros_like(full)
        )
        self.sunk = (
            float(np.sum(sampled)) * (cost.retrieve + cost.evaluate)
            if sampling_aware
            else 0.0
        )
        self.cost_r = self.t * cost.retrieve
        self.cost_e = self.t * cost.evaluate
        self.sqrt_v = np.sqrt(self.v)
        self.noise = 0.25 * self.t  # variance floor per group

    # --- objective -----------------------------------------------------
    def objective(self, r: np.ndarray, e: np.ndarray) -> float:
        return float(self.cost_r @ r + self.cost_e @ e) + self.sunk

    # --- precision constraint: margin - e_rho * dev >= 0 ---------------
    def precision_gap(self, r, e):
        margin = np.sum(
            self.f_pos * (1.0 - self.alpha)
            + self.t * self.s * (1.0 - self.alpha) * r
            - self.t * (1.0 - self.s) * self.alpha * (r - e)
        )
        return margin - self.e_rho * self._dev_p(r, e)

    def _dev_p(self, r, e):
        u = self.sqrt_v * self.t * (r - self.alpha * e)
        if self.mode == bounds.MODE_UNKNOWN:
            return float(np.sum(u + 0.5 * np.sqrt(self.t)))
        return math.sqrt(float(np.sum(u * u + self.noise)))

    def precision_gap_grad(self, r, e):
        d_margin_r = self.t * self.s * (1.0 - self.alpha) - self.t * (1.0 - self.s) * self.alpha
        d_margin_e = self.t * (1.0 - self.s) * self.alpha
        if self.mode == bounds.MODE_UNKNOWN:
            d_dev_r = self.sqrt_v * self.t
            d_dev_e = -self.alpha * self.sqrt_v * self.t
        else:
            u = self.sqrt_v * self.t * (r - self.alpha * e)
            dev = math.sqrt(float(np.sum(u * u + self.noise)))
            scale = self.sqrt_v * self.t * u / max(dev, 1e-300)
            d_dev_r = scale
            d_dev_e = -self.alpha * scale
        return (
            d_margin_r - self.e_rho * d_dev_r,
            d_margin_e - self.e_rho * d_dev_e,
        )

    # --- recall constraint ----------------------------------------------
    def recall_gap(self, r, e):
        margin = np.sum(self.f_pos + self.t * self.s * r) - self.beta * np.sum(
            self.f_pos + self.t * self.s
        )
        return float(margin) - self.e_rho * self._dev_r(r)

    def _dev_r(self, r):
        if self.mode == bounds.MODE_UNKNOWN:
            return float(
                np.sum(self.sqrt_v * self.t * np.abs(r - self.beta) + 0.5 * np.sqrt(self.t))
            )
        u = self.sqrt_v * self.t * (r - self.beta)
        return math.sqrt(float(np.sum(u * u + self.noise)))

    def recall_gap_grad(self, r):
        d_margin_r = self.t * self.s
        if self.mode == bounds.MODE_UNKNOWN:
            d_dev_r = self.sqrt_v * self.t * np.sign(r - self.beta)
        else:
            u = self.sqrt_v * self.t * (r - self.beta)
            dev = math.sqrt(float(np.sum(u * u + self.noise)))
            d_dev_r = self.sqrt_v * self.t * u / max(dev, 1e-300)
        return d_margin_r - self.e_rho * d_dev_r

    def feasible(self, r, e, slack: float = 0.0) -> bool:
        return self.precision_gap(r, e) >= -slack and self.recall_gap(r, e) >= -slack


def _project_box(r: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean projection onto {0 <= E <= R <= 1}, per group."""
    over = e > r
    mid = 0.5 * (r + e)
    r = np.where(over, mid, r)
    e = np.where(over, mid, e)
    return np.clip(r, 0.0, 1.0), np.clip(e, 0.0, 1.0)


def _restore_feasibility(
    prog: _Program, r: np.ndarray, e: np.ndarray
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Scale (R, E) toward (1, 1) until both constraint gaps are >= 0.

    Scans the segment coarsely for the first feasible point, then bisects
    down to the crossing; the returned point is verified directly.  Returns
    ``None`` when even the universal endpoint fails (infeasible-by-bound).
    """
    if prog.feasible(r, e):
        return r, e
    ones_r = np.ones_like(r)
    ones_e = np.ones_like(e)
    if not prog.feasible(ones_r, ones_e):
        return None

    def point(lam: float):
        return r + lam * (ones_r - r), e + lam * (ones_e - e)

    lo, hi = 0.0, 1.0
    for step in np.linspace(0.05, 1.0, 20):
        if prog.feasible(*point(float(step))):
            hi = float(step)
            lo = hi - 0.05
            break
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if prog.feasible(*point(mid)):
            hi = mid
        else:
            lo = mid
    final = point(hi)
    if not prog.feasible(*final):
        return None
    return final


def _descend(prog: _Program, settings: SolverSettings, beta_init: float):
    """Projected subgradient descent on the penalized convex objective.

    All instance constants are hoisted into locals; the loop touches only
    small fixed-size arrays, so per-iteration cost is a handful of numpy
    calls.
    """
    m = len(prog.t)
    r = np.full(m, min(1.0, beta_init + 0.1))
    e = np.zeros(m)

    unknown = prog.mode == bounds.MODE_UNKNOWN
    alpha, beta, e_rho = prog.alpha, prog.beta, prog.e_rho
    cost_r, cost_e = prog.cost_r, prog.cost_e
    w_dev = prog.sqrt_v * prog.t
    noise_sum = float(np.sum(prog.noise))
    noise_lin = 0.5 * float(np.sum(np.sqrt(prog.t)))
    mp_r = prog.t * prog.s * (1.0 - alpha) - prog.t * (1.0 - prog.s) * alpha
    mp_e = prog.t * (1.0 - prog.s) * alpha
    mp_0 = float(np.sum(prog.f_pos)) * (1.0 - alpha)
    mr_r = prog.t * prog.s
    mr_0 = float(np.sum(prog.f_pos)) - beta * float(
        np.sum(prog.f_pos + prog.t * prog.s)
    )
    cost_scale = max(float(np.sum(cost_r + cost_e)), 1.0)
    gap_scale = max(float(np.sum(prog.t)), 1.0)

    stages = 3
    inner = max(1, settings.max_iterations // stages)
    mu = 100.0
    best: Optional[tuple[float, np.ndarray, np.ndarray]] = None
    stagnant = 0
    for _ in range(stages):
        for k in range(inner):
            u_p = w_dev * (r - alpha * e)
            u_r = w_dev * (r - beta)
            if unknown:
                dev_p = float(np.sum(u_p)) + noise_lin
                dev_r = float(np.sum(w_dev * np.abs(r - beta))) + noise_lin
            else:
                dev_p = math.sqrt(float(u_p @ u_p) + noise_sum)
                dev_r = math.sqrt(float(u_r @ u_r) + noise_sum)
            gp = mp_0 + float(mp_r @ r + mp_e @ e) - e_rho * dev_p
            gr = mr_0 + float(mr_r @ r) - e_rho * dev_r
            grad_r = cost_r / cost_scale
            grad_e = cost_e / cost_scale
            if gp < 0:
                if unknown:
                    d_dev_r, d_dev_e = w_dev, -alpha * w_dev
                else:
                    scale = w_dev * u_p / max(dev_p, 1e-300)
                    d_dev_r, d_dev_e = scale, -alpha * scale
                w = 2.0 * mu * (-gp) / (gap_scale * gap_scale)
                grad_r = grad_r - w * (mp_r - e_rho * d_dev_r)
                grad_e = grad_e - w * (mp_e - e_rho * d_dev_e)
            if gr < 0:
                if unknown:
                    d_dev = w_dev * np.sign(r - beta)
                else:
                    d_dev = w_dev * u_r / max(dev_r, 1e-300)
                w = 2.0 * mu * (-gr) / (gap_scale * gap_scale)
                grad_r = grad_r - w * (mr_r - e_rho * d_dev)
            norm = max(float(np.max(np.abs(grad_r))), float(np.max(np.abs(grad_e))), 1e-12)
            step = 0.25 / math.sqrt(1.0 + k)
            new_r, new_e = _project_box(r - step * grad_r / norm, e - step * grad_e / norm)
            moved = max(
                float(np.max(np.abs(new_r - r))), float(np.max(np.abs(new_e - e)))
            )
            r, e = new_r, new_e
            stagnant += 1
            if gp >= 0 and gr >= 0:
                c = prog.objective(r, e)
                if best is None or c < best[0] - 1e-9 * cost_scale:
                    best = (c, r.copy(), e.copy())
                    stagnant = 0
            if moved < settings.kkt_tolerance and k > 10:
                break
            if stagnant > 250:
                if best is not None:
                    return best[1], best[2]
                break  # escalate the penalty and retry
        mu *= 100.0
    if best is not None and (
        not prog.feasible(r, e) or prog.objective(r, e) > best[0]
    ):
        return best[1], best[2]
    return r, e


def _linearized_candidate(
    prog: _Program,
    groups: Sequence[GroupStats],
    constraints: Constraints,
    cost: CostModel,
    iterations: int = 8,
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Sequential linearization: freeze the deviation bounds at the current
    iterate, solve the resulting linear program exactly with the two-pass
    greedy, and repeat.  The convex optimum is a fixed point (its active
    thresholds reproduce it), so this usually lands very close; the caller
    still restores and verifies against the true constraints.
    """
    live = prog.t > 0
    if not live.any():
        return np.zeros_like(prog.t), np.zeros_like(prog.t)
    lp_groups = [
        GroupStats(g.group_id, int(t), s)
        for g, t, s, keep in zip(groups, prog.t, prog.s, live)
        if keep
    ]
    sum_fpos = float(np.sum(prog.f_pos))
    order = [g.group_id for g in groups]
    r = np.full(len(order), min(1.0, prog.beta + 0.1))
    e = np.zeros(len(order))
    for _ in range(iterations):
        h_p = max(0.0, prog.e_rho * prog._dev_p(r, e) - sum_fpos * (1.0 - prog.alpha))
        h_r = max(0.0, prog.e_rho * prog._dev_r(r) - (1.0 - prog.beta) * sum_fpos)
        try:
            plan = solve_bigreedy(
                lp_groups,
                constraints,
                cost,
                thresholds=bounds.Thresholds(h_p, h_r, prog.e_rho),
                precheck=False,
            )
        except InfeasibleError:
            return None
        new_r = np.array([plan.decisions.get(gid, (0.0, 0.0))[0] for gid in order])
        new_e = np.array([plan.decisions.get(gid, (0.0, 0.0))[1] for gid in order])
        if np.allclose(new_r, r, atol=1e-12) and np.allclose(new_e, e, atol=1e-12):
            return new_r, new_e
        r, e = new_r, new_e
    return r, e


def _orthant_lp_candidates(prog: _Program) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact LP candidates for the worst-case-correlation program.

    Its only nonlinearity is the |R - beta| kink; with the sign of every
    ``R_a - beta`` fixed, the whole program is linear.  The promising sign
    patterns are selectivity prefixes (retrieval concentrates on the most
    selective groups), so one small LP per prefix is solved exactly; each
    solution satisfies the true constraints on its own orthant.
    """
    m = len(prog.t)
    e_rho, alpha, beta = prog.e_rho, prog.alpha, prog.beta
    w = prog.sqrt_v * prog.t
    noise_lin = 0.5 * float(np.sum(np.sqrt(prog.t)))
    mp_r = prog.t * prog.s * (1.0 - alpha) - prog.t * (1.0 - prog.s) * alpha
    mp_e = prog.t * (1.0 - prog.s) * alpha
    mp_0 = float(np.sum(prog.f_pos)) * (1.0 - alpha)
    mr_r = prog.t * prog.s
    mr_0 = float(np.sum(prog.f_pos)) - beta * float(
        np.sum(prog.f_pos + prog.t * prog.s)
    )
    objective = np.concatenate([prog.cost_r, prog.cost_e])
    row_p = np.concatenate([mp_r - e_rho * w, mp_e + e_rho * alpha * w])
    rhs_p = e_rho * noise_lin - mp_0
    coupling = [
        np.concatenate([-(np.arange(m) == i).astype(float), (np.arange(m) == i).astype(float)])
        for i in range(m)
    ]
    order = np.argsort(-prog.s, kind="stable")
    out = []
    for k in range(m + 1):
        sign = -np.ones(m)
        sign[order[:k]] = 1.0
        row_r = np.concatenate([mr_r - e_rho * w * sign, np.zeros(m)])
        rhs_r = e_rho * noise_lin - mr_0 - e_rho * beta * float(np.sum(w * sign))
        lo = np.where(sign > 0, min(beta, 1.0), 0.0)
        hi = np.where(sign > 0, 1.0, min(beta, 1.0))
        res = linprog(
            objective,
            A_ub=np.array([-row_p, -row_r] + coupling),
            b_ub=np.array([-rhs_p, -rhs_r] + [0.0] * m),
            bounds=list(zip(lo, hi)) + [(0.0, 1.0)] * m,
            method="highs",
        )
        if res.status == 0:
            r, e = res.x[:m], res.x[m:]
            out.append((np.clip(r, 0, 1), np.minimum(np.clip(e, 0, 1), np.clip(r, 0, 1))))
    return out


class _IncrementalGaps:
    """O(1) constraint-gap updates under single-coordinate moves.

    The margins are linear and both deviation bounds are per-group sums (of
    values, or of squares under a root), so changing one group's (R, E)
    only needs that group's old and new contribution.
    """

    def __init__(self, prog: _Program, r: np.ndarray, e: np.ndarray):
        self.unknown = prog.mode == bounds.MODE_UNKNOWN
        self.alpha, self.beta, self.e_rho = prog.alpha, prog.beta, prog.e_rho
        self.w = (prog.sqrt_v * prog.t).tolist()
        self.mp_r = (
            prog.t * prog.s * (1.0 - prog.alpha)
            - prog.t * (1.0 - prog.s) * prog.alpha
        ).tolist()
        self.mp_e = (prog.t * (1.0 - prog.s) * prog.alpha).tolist()
        self.mr_r = (prog.t * prog.s).tolist()
        self.mp_0 = float(np.sum(prog.f_pos)) * (1.0 - prog.alpha)
        self.mr_0 = float(np.sum(prog.f_pos)) - prog.beta * float(
            np.sum(prog.f_pos + prog.t * prog.s)
        )
        self.noise_sum = float(np.sum(prog.noise))
        self.noise_lin = 0.5 * float(np.sum(np.sqrt(prog.t)))
        self.r = [float(x) for x in r]
        self.e = [float(x) for x in e]
        self.margin_p = self.mp_0 + sum(
            c * x for c, x in zip(self.mp_r, self.r)
        ) + sum(c * x for c, x in zip(self.mp_e, self.e))
        self.margin_r = self.mr_0 + sum(c * x for c, x in zip(self.mr_r, self.r))
        up = [w * (x - self.alpha * y) for w, x, y in zip(self.w, self.r, self.e)]
        ur = [w * (x - self.beta) for w, x in zip(self.w, self.r)]
        if self.unknown:
            self.acc_p = sum(up)
            self.acc_r = sum(abs(u) for u in ur)
        else:
            self.acc_p = sum(u * u for u in up)
            self.acc_r = sum(u * u for u in ur)

    def _dev(self, acc: float) -> float:
        if self.unknown:
            return acc + self.noise_lin
        return math.sqrt(max(acc, 0.0) + self.noise_sum)

    def _deltas(self, i: int, ri: float, ei: float):
        dmp = self.mp_r[i] * (ri - self.r[i]) + self.mp_e[i] * (ei - self.e[i])
        dmr = self.mr_r[i] * (ri - self.r[i])
        up_old = self.w[i] * (self.r[i] - self.alpha * self.e[i])
        up_new = self.w[i] * (ri - self.alpha * ei)
        ur_old = self.w[i] * (self.r[i] - self.beta)
        ur_new = self.w[i] * (ri - self.beta)
        if self.unknown:
            dacc_p = up_new - up_old
            dacc_r = abs(ur_new) - abs(ur_old)
        else:
            dacc_p = up_new * up_new - up_old * up_old
            dacc_r = ur_new * ur_new - ur_old * ur_old
        return dmp, dmr, dacc_p, dacc_r

    def feasible_with(self, i: int, ri: float, ei: float) -> bool:
        dmp, dmr, dacc_p, dacc_r = self._deltas(i, ri, ei)
        gp = self.margin_p + dmp - self.e_rho * self._dev(self.acc_p + dacc_p)
        gr = self.margin_r + dmr - self.e_rho * self._dev(self.acc_r + dacc_r)
        return gp >= 0.0 and gr >= 0.0

    def commit(self, i: int, ri: float, ei: float) -> None:
        dmp, dmr, dacc_p, dacc_r = self._deltas(i, ri, ei)
        self.margin_p += dmp
        self.margin_r += dmr
        self.acc_p += dacc_p
        self.acc_r += dacc_r
        self.r[i] = ri
        self.e[i] = ei


def _polish(
    prog: _Program, r: np.ndarray, e: np.ndarray, rounds: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy cost trimming of a feasible point, one coordinate at a time.

    For each coordinate the feasible values form an interval (the gaps are
    concave in a single coordinate), so bisection finds the lowest feasible
    value.  Every reduction is re-validated incrementally before being
    committed, so the result stays feasible by construction.  Evaluation
    probabilities are trimmed first (they cost more per unit).
    """
    state = _IncrementalGaps(prog, r, e)
    m = len(r)
    order = sorted(range(m), key=lambda i: -prog.cost_e[i])
    for _ in range(rounds):
        improved = False
        for i in order:
            if state.e[i] > 0:
                if state.feasible_with(i, state.r[i], 0.0):
                    state.commit(i, state.r[i], 0.0)
                    improved = True
                else:
                    lo, hi = 0.0, state.e[i]
                    for _ in range(25):
                        mid = 0.5 * (lo + hi)
                        if state.feasible_with(i, state.r[i], mid):
                            hi = mid
                        else:
                            lo = mid
                    if hi < state.e[i]:
                        state.commit(i, state.r[i], hi)
                        improved = True
        for i in order:
            if state.r[i] > state.e[i]:
                if state.feasible_with(i, state.e[i], state.e[i]):
                    state.commit(i, state.e[i], state.e[i])
                    improved = True
                else:
                    lo, hi = state.e[i], state.r[i]
                    for _ in range(25):
                        mid = 0.5 * (lo + hi)
                        if state.feasible_with(i, mid, state.e[i]):
                            hi = mid
                        else:
                            lo = mid
                    if hi < state.r[i]:
                        state.commit(i, hi, state.e[i])
                        improved = True
        if not improved:
            break
    out_r, out_e = np.array(state.r), np.array(state.e)
    if not prog.feasible(out_r, out_e):  # guard against accumulated drift
        return r, e
    return out_r, out_e


def solve_convex(
    groups: Sequence[GroupStats],
    constraints: Constraints,
    cost: CostModel,
    *,
    mode: str = bounds.MODE_INDEPENDENT,
    sampling_aware: bool = False,
    settings: Optional[SolverSettings] = None,
) -> Strategy:
    """Minimize expected cost subject to the deviation-bounded margins.

    Raises :class:`InfeasibleError` when no strategy satisfies the bounded
    constraints (not even ``R = E = 1``); the caller may still fall back to
    the universal strategy, whose *realized* precision and recall are 1 by
    construction regardless of the bounds.
    """
    if mode not in bounds.DEVIATION_MODES:
        raise ValueError(f"mode must be one of {bounds.DEVIATION_MODES}, got {mode!r}")
    if settings is None:
        settings = SolverSettings()
    if sampling_aware:
        for g in groups:
            if g.sampled > g.size:
                raise ValueError(f"group {g.group_id!r}: sampled exceeds size")

    prog = _Program(groups, constraints, cost, mode, sampling_aware)
    live = prog.t > 0

    def raw_candidates(p: _Program) -> list[tuple[np.ndarray, np.ndarray]]:
        points = []
        slp = _linearized_candidate(p, groups, constraints, cost)
        if slp is not None:
            points.append(slp)
        points.append(_descend(p, settings, constraints.beta))
        if p.mode == bounds.MODE_UNKNOWN:
            points.extend(_orthant_lp_candidates(p))
        restored = [_restore_feasibility(p, r, e) for r, e in points]
        feasible = [x for x in restored if x is not None]
        # Polishing is the expensive step; spend it on the best few only.
        feasible.sort(key=lambda c: p.objective(*c))
        return [_polish(p, r, e) for r, e in feasible[:3]]

    candidates = raw_candidates(prog)
    if mode == bounds.MODE_INDEPENDENT:
        # Any point feasible under the worst-case correlation bound is also
        # feasible here (the independent bound is never larger), so the
        # worst-case program's entire candidate set is reused: this keeps
        # the independent solve at least as cheap as the worst-case one.
        alt = _Program(groups, constraints, cost, bounds.MODE_UNKNOWN, sampling_aware)
        for point in raw_candidates(alt):
            if prog.feasible(*point):
                candidates.append(_polish(prog, *point))
    if not candidates:
        raise InfeasibleError(
            "no strategy satisfies the deviation-bounded constraints "
            "(instance is infeasible-by-bound)"
        )
    r, e = min(candidates, key=lambda c: prog.objective(*c))
    # Groups with no unsampled tuples left get the canonical (0, 0): the
    # probabilistic part is empty, so the choice cannot affect anything.
    r = np.where(live, r, 0.0)
    e = np.where(live, e, 0.0)

    strategy = Strategy.from_arrays([g.group_id for g in groups], r, e)
    post_p = bounds.precision_margin(
        strategy, groups, constraints.alpha, discount_sampled=sampling_aware
    ) - prog.e_rho * bounds.deviation_bound_precision(
        strategy, groups, constraints.alpha, mode, discount_sampled=sampling_aware
    )
    post_r = bounds.recall_margin(
        strategy, groups, constraints.beta, discount_sampled=sampling_aware
    ) - prog.e_rho * bounds.deviation_bound_recall(
        strategy, groups, constraints.beta, mode, discount_sampled=sampling_aware
    )
    if post_p < -settings.feasibility_margin or post_r < -settings.feasibility_margin:
        raise InfeasibleError(
            f"solver output failed the post-check (precision slack {post_p:.3g}, "
            f"recall slack {post_r:.3g})"
        )
    return strategy
