"""Per-realization assertions shared by the experiment runner and the tests.

Each check returns a ``Check`` (name, passed flag, detail string) rather than
raising, so callers decide whether a failure aborts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..budgeted import EngineResult, OBCMResult, budget_wrapper
from ..instance import BudgetedInstance, Instance, assignment_cost
from ..norms import activation_cost, leq
from ..oracle import opt_norm_pack


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def obcm_half(res: OBCMResult, opt_obcm: int) -> Check:
    """If the activated sets cost less than B, at least half the optimum is covered."""
    if not res.cost < res.budget:
        return Check("obcm_half", True, "budget reached")
    ok = 2 * res.covered_count >= opt_obcm
    return Check("obcm_half", ok, f"covered={res.covered_count} opt={opt_obcm}")


def obcm_wrapper(res: OBCMResult, costs: Sequence[float]) -> Check:
    worst = max(sum(costs[i] for i in res.kept_sets(c)) for c in (False, True))
    return Check("obcm_wrapper", leq(worst, res.budget), f"kept cost {worst} vs {res.budget}")


def engine_wrapper(res: EngineResult, value) -> Check:
    """Both wrapper outcomes keep the activation value within the declared budget.

    ``value(y)`` evaluates an activation profile.
    """
    worst = 0.0
    for coin in (False, True):
        kept = budget_wrapper(res, coin)
        worst = max(worst, value(kept.y))
    return Check("engine_wrapper", leq(worst, res.declared_budget),
                 f"kept value {worst} vs {res.declared_budget}")


def pbounded_value(binst: BudgetedInstance):
    return lambda y: activation_cost(binst.aggregate, y, binst.machine_budgets)


def opt_upper_bound(binst: BudgetedInstance, res: EngineResult, opt_bsp: int, s: float) -> Check:
    """(9/10) OPT <= |Alg| + sum over active i of max(OPT a_i / (s^p B), OPT_i(T_i))."""
    p = float(binst.aggregate.p)
    B = binst.budget
    total = float(res.scheduled)
    for i in res.active:
        rec = res.machines[i]
        T = rec.T
        opt_T = opt_norm_pack(binst.inner_norms[i], [binst.jobs[j][i] for j in T], binst.machine_budgets[i],
                              job_ids=T)[0] if T else 0
        total += max(opt_bsp * rec.a / (s ** p * B), opt_T)
    ok = 0.9 * opt_bsp <= total + 1e-9
    return Check("opt_upper_bound", ok, f"0.9*{opt_bsp} vs {total:.6g}")


def completeness(placed: int, n: int) -> Check:
    return Check("completeness", placed == n, f"{placed}/{n}")


def agent_costs(inst: Instance, agents, budget: float) -> Check:
    """Every agent's committed cost stays within its declared violation bound."""
    worst, bad = 0.0, 0
    for ag in agents:
        if not ag.assignment.placements:
            continue
        c = assignment_cost(inst, ag.assignment)
        lim = ag.violation * budget
        worst = max(worst, c / lim if lim > 0 else (0.0 if c == 0 else math.inf))
        bad += not leq(c, lim)
    return Check("agent_costs", bad == 0, f"worst ratio {worst:.4g}")


def doubling_invariant(hindsight: Sequence[float], phases) -> Check:
    """Hindsight optimum at or below the running estimate at every arrival."""
    bad = 0
    for ph_idx, ph in enumerate(phases):
        end = phases[ph_idx + 1].start if ph_idx + 1 < len(phases) else len(hindsight)
        for j in range(ph.start, end):
            bad += not leq(hindsight[j], ph.opt_hat)
    return Check("doubling", bad == 0, f"{bad} arrivals above the estimate")
