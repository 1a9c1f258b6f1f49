"""Sched-Pack solved through Budgeted-Sched-Pack.

A machine whose final load is unknown in advance is replaced by copies with
geometrically decreasing budgets.  The copy instances are then solved with one
of the budgeted engines, chosen by the aggregate:

==================  =====================================  ==============
aggregate           reduction                              load bound / B
==================  =====================================  ==============
SumPowers, p-norm   copies, p-bounded engine with s = p    (3pc)^p
weighted l1         copies, weighted-l1 engine             3c
l_p norm            copies, weights b^(p-1), budget (3B)^p 9c
Top-k               copies, weights 1[b > 3B/k], budget 3B 9c
other symmetric     one random budget level, count <= kappa 2c
Nested              clusters solved recursively            outer(inner)
==================  =====================================  ==============

Every solver here is an online agent: ``offer(j, loads)`` returns the
committed placement or None.  The budget wrapper runs in online mode, so the
returned placements already satisfy the bound in the table.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .budgeted import ActivationEngine, PBoundedRule, WeightedL1Rule
from .instance import Assignment, BudgetedInstance, Instance
from .norms import (INF, GroupSum, LInf, Lp, NormAgg, Nested, OrderedSym, PNormPower, SumPowers, TopK,
                    WeightedL1, eval_norm, is_symmetric, leq, unit_cap, unit_prefix_norm)
from .oracle import opt_sched_pack
from .rng import RandomSource
from .single_machine import NormMachine

DEFAULT_CAP_CEILING = 1e12


# ------------------------------------------------------------------ copies


def copy_levels(m: int) -> int:
    """Number of budget levels per machine: b^max / 2^l for l = 0..ceil(log2 m)."""
    return math.ceil(math.log2(m)) + 1 if m > 1 else 1


@dataclass(frozen=True)
class CopyMap:
    owner: tuple        # copy -> original machine
    level: tuple        # copy -> l
    budgets: tuple      # copy -> b_{i,l}
    caps: tuple         # original machine -> b_i^max

    @property
    def groups(self) -> tuple:
        m = len(self.caps)
        return tuple(tuple(c for c, o in enumerate(self.owner) if o == i) for i in range(m))

    def map_back(self, a: Assignment) -> Assignment:
        out = Assignment(len(self.caps))
        for j, (c, k) in sorted(a.placements.items()):
            out.place(j, self.owner[c], k)
        return out


def machine_caps(aggregate, B: float, m: int, ceiling: float = DEFAULT_CAP_CEILING) -> list[float]:
    caps = []
    for i in range(m):
        c = unit_cap(aggregate, i, B, m)
        if math.isinf(c):
            warnings.warn(f"machine {i} has an unbounded cap; clamped to {ceiling}")
            c = ceiling
        caps.append(c)
    return caps


def make_copy_map(caps: Sequence[float], m: Optional[int] = None) -> CopyMap:
    m = len(caps) if m is None else m
    L = copy_levels(m)
    owner, level, budgets = [], [], []
    for i, cap in enumerate(caps):
        for l in range(L):
            owner.append(i)
            level.append(l)
            budgets.append(cap / 2 ** l)
    return CopyMap(tuple(owner), tuple(level), tuple(budgets), tuple(caps))


def reduce_to_copies(inst: Instance, p: Optional[float] = None,
                     ceiling: float = DEFAULT_CAP_CEILING) -> tuple[BudgetedInstance, CopyMap]:
    """Copies with budgets b^max/2^l, aggregate f over copy sums, budget 3^p B."""
    p = float(inst.aggregate.p) if p is None else float(p)
    caps = machine_caps(inst.aggregate, inst.budget, inst.m, ceiling)
    cm = make_copy_map(caps)
    jobs = [np.stack([job[i] for i in cm.owner]) for job in inst.jobs]
    binst = BudgetedInstance(
        m=len(cm.owner), r=inst.r, inner_norms=tuple(inst.inner_norms[i] for i in cm.owner),
        aggregate=GroupSum(inst.aggregate, cm.groups), budget=3 ** p * inst.budget,
        jobs=tuple(jobs), machine_budgets=cm.budgets)
    return binst, cm


def lp_weights(cm: CopyMap, p: float) -> list[float]:
    return [b ** (p - 1) for b in cm.budgets]


def topk_weights(cm: CopyMap, k: int, B: float) -> list[float]:
    return [1.0 if b > 3 * B / k else 0.0 for b in cm.budgets]


def l1_instance(inst: Instance, ceiling: float = DEFAULT_CAP_CEILING) -> tuple[BudgetedInstance, CopyMap]:
    """Weighted-l1 budgeted instance for an l_p, Top-k or weighted-l1 aggregate."""
    agg = inst.aggregate
    if not isinstance(agg, NormAgg):
        raise ValueError("l1 reformulation needs a norm aggregate")
    nm, B = agg.norm, inst.budget
    caps = machine_caps(agg, B, inst.m, ceiling)
    cm = make_copy_map(caps)
    if isinstance(nm, Lp):
        w, budget = lp_weights(cm, nm.p), (3 * B) ** nm.p
    elif isinstance(nm, TopK):
        w, budget = topk_weights(cm, nm.k, B), 3 * B
    elif isinstance(nm, WeightedL1):
        w, budget = [nm.weights[o] for o in cm.owner], 3 * B
    else:
        raise ValueError(f"no l1 reformulation for {nm.kind}")
    jobs = [np.stack([job[i] for i in cm.owner]) for job in inst.jobs]
    binst = BudgetedInstance(m=len(cm.owner), r=inst.r,
                             inner_norms=tuple(inst.inner_norms[i] for i in cm.owner),
                             aggregate=NormAgg(WeightedL1(w)), budget=budget, jobs=tuple(jobs),
                             machine_budgets=cm.budgets)
    return binst, cm


def symmetric_levels(norm, B: float, m: int) -> list[float]:
    """Candidate common machine budgets B~/2^l, l = 0..max(1, ceil(log2 m)) - 1."""
    Bt = B / unit_prefix_norm(norm, 1)
    L = max(1, math.ceil(math.log2(m))) if m > 1 else 1
    return [Bt / 2 ** l for l in range(L)]


def kappa(norm, bbar: float, B: float, m: int) -> int:
    """max{k in 0..m : ||(bbar,...,bbar,0,...)|| <= 2B} by binary search."""
    lo, hi = 0, m
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if leq(bbar * unit_prefix_norm(norm, mid), 2 * B):
            lo = mid
        else:
            hi = mid - 1
    return lo


def symmetric_instances(inst: Instance) -> list[tuple[float, int, BudgetedInstance]]:
    """One unit-weight budgeted instance per budget level: at most kappa machines of budget bbar."""
    nm = inst.aggregate.norm
    out = []
    for bbar in symmetric_levels(nm, inst.budget, inst.m):
        kap = kappa(nm, bbar, inst.budget, inst.m)
        out.append((bbar, kap, BudgetedInstance(
            m=inst.m, r=inst.r, inner_norms=inst.inner_norms,
            aggregate=NormAgg(WeightedL1([1.0 / bbar] * inst.m)), budget=float(kap),
            jobs=inst.jobs, machine_budgets=(bbar,) * inst.m)))
    return out


def lp_sandwich(b: Sequence[float], y: Sequence[int], p: float) -> tuple[float, float, float]:
    """(sum y b^p, (sum y b)^p, 2^p sum y b^p) for one machine's copies."""
    s1 = sum(bb ** p for bb, yy in zip(b, y) if yy)
    s = sum(bb for bb, yy in zip(b, y) if yy)
    return s1, s ** p, 2 ** p * s1


def topk_sandwich(budgets: Sequence[Sequence[float]], y: Sequence[Sequence[int]], k: int, B: float
                  ) -> tuple[float, float, float]:
    """(min(sum_big y b, 3B), Top-k of merged loads, sum_big y b + 6B)."""
    loads = [sum(b for b, yy in zip(bs, ys) if yy) for bs, ys in zip(budgets, y)]
    big = sum(b for bs, ys in zip(budgets, y) for b, yy in zip(bs, ys) if yy and b > 3 * B / k)
    return min(big, 3 * B), eval_norm(TopK(k), loads), big + 6 * B


# ------------------------------------------------------------ machine models


class ClusterMachine:
    """A block of machines acting as one machine of the outer problem.

    Its ways are (local machine, way) pairs flattened as ``local * r + k``.
    """

    def __init__(self, template: Instance):
        for nm in template.inner_norms:
            if nm.dim is not None:
                raise ValueError("clusters support dimension-free inner norms only")
        self.template = template
        self.r = template.r
        self.c = violation_bound(template)

    def pack_opt(self, offered, budget: float) -> int:
        if not offered:
            return 0
        inst = self.template.with_budget(budget).with_jobs([ld for _, ld in offered])
        return opt_sched_pack(inst)[0]

    def new_solver(self, budget: float, guess: float, rng: RandomSource):
        return _ClusterSolver(make_sched_pack_solver(self.template, budget, guess, rng), self.r, budget)


class _ClusterSolver:
    def __init__(self, agent, r: int, budget: float):
        self.agent, self.r, self.budget = agent, r, budget
        self.accepted: list[tuple[int, int]] = []

    def offer(self, j, way_loads):
        res = self.agent.offer(j, np.asarray(way_loads))
        if res is None:
            return None
        i, k = res
        self.accepted.append((j, i * self.r + k))
        return i * self.r + k


# ------------------------------------------------------------------ agents


class PackAgent:
    """Online Sched-Pack algorithm over a fixed machine template."""

    violation: float = 1.0

    def __init__(self, template: Instance, budget: float):
        self.template = template
        self.budget = float(budget)
        self.assignment = Assignment(template.m)
        self.offers = 0

    def offer(self, j: int, loads) -> Optional[tuple[int, int]]:
        self.offers += 1
        res = self._offer(j, np.asarray(loads, dtype=float))
        if res is not None:
            self.assignment.place(j, *res)
        return res

    def _offer(self, j, loads):
        raise NotImplementedError


class RejectAll(PackAgent):
    violation = 0.0

    def _offer(self, j, loads):
        return None


class _EngineAgent(PackAgent):
    """Runs an activation engine over (copies of) outer machines."""

    def __init__(self, template, budget, models, owner, engine_budgets, rule, guess, rng, decode):
        super().__init__(template, budget)
        self.owner = list(owner)
        self.decode = decode
        self.engine = ActivationEngine([models[o] for o in self.owner], engine_budgets, rule,
                                       opt=float(math.ceil(guess - 1e-12)), rng=rng.child("engine"),
                                       wrapper="online")

    def _offer(self, j, loads):
        per = self._split(loads)
        res = self.engine.offer(j, [per[o] for o in self.owner])
        if res is None:
            return None
        c, k = res
        return self.decode(self.owner[c], k)

    def _split(self, loads):
        return loads


def _plain_models(template: Instance):
    return [NormMachine(nm, template.r) for nm in template.inner_norms]


def _outer(template: Instance):
    """Outer machine models, load splitter and placement decoder."""
    agg = template.aggregate
    if isinstance(agg, NormAgg) and isinstance(agg.norm, Nested):
        nested = agg.norm
        clusters = [list(idx) for idx, _ in nested.blocks]
        models = []
        for idx, inner in nested.blocks:
            sub = Instance(m=len(idx), r=template.r, inner_norms=tuple(template.inner_norms[i] for i in idx),
                           aggregate=NormAgg(inner), budget=template.budget)
            models.append(ClusterMachine(sub))
        outer_agg = NormAgg(nested.outer)

        def split(loads):
            return [loads[c] for c in clusters]

        def decode(l, k):
            return clusters[l][k // template.r], k % template.r
        return models, split, decode, outer_agg, len(clusters)
    return _plain_models(template), (lambda loads: loads), (lambda i, k: (i, k)), agg, template.m


def _max_c(models) -> float:
    return max((getattr(md, "c", 1.0) for md in models), default=1.0)


def violation_bound(template: Instance) -> float:
    """Per-realization bound on aggregate / budget for the dispatched solver."""
    models, _, _, agg, _ = _outer(template)
    c = _max_c(models)
    if isinstance(agg, (SumPowers, PNormPower)):
        return (3 * agg.p * c) ** agg.p
    nm = agg.norm
    if isinstance(nm, (Lp, TopK)):
        return 9 * c
    if isinstance(nm, WeightedL1):
        return 3 * c
    if is_symmetric(nm):
        return 2 * c
    raise ValueError(f"no Sched-Pack solver for aggregate {agg!r}")


def _copies_agent(template, budget, guess, rng, kind):
    models, split, decode, agg, m = _outer(template)
    caps = machine_caps(agg, budget, m)
    cm = make_copy_map(caps)
    if kind == "pbounded":
        p = float(agg.p)
        f2 = GroupSum(agg, cm.groups)
        rule = PBoundedRule(f2, cm.budgets, 3 ** p * budget, p, math.ceil(guess - 1e-12), len(cm.owner))
    else:
        nm = agg.norm
        if kind == "lp":
            w, B1 = lp_weights(cm, nm.p), (3 * budget) ** nm.p
        elif kind == "topk":
            w, B1 = topk_weights(cm, nm.k, budget), 3 * budget
        else:
            w, B1 = [nm.weights[o] for o in cm.owner], 3 * budget
        a = [ww * b if ww > 0 else 0.0 for ww, b in zip(w, cm.budgets)]
        rule = WeightedL1Rule(a, B1, math.ceil(guess - 1e-12), len(cm.owner))
    agent = _EngineAgent(template, budget, models, cm.owner, cm.budgets, rule, guess, rng, decode)
    agent._split = split
    agent.copy_map = cm
    agent.violation = violation_bound(template)
    return agent


def solve_sched_pack_pbounded(template: Instance, M: float, rng: RandomSource, budget=None):
    if not isinstance(template.aggregate, (SumPowers, PNormPower)):
        raise ValueError("p-bounded path needs a SumPowers or PNormPower aggregate")
    return _copies_agent(template, template.budget if budget is None else budget, M, rng, "pbounded")


def solve_sched_pack_lp(template: Instance, M: float, rng: RandomSource, budget=None):
    return _copies_agent(template, template.budget if budget is None else budget, M, rng, "lp")


def solve_sched_pack_topk(template: Instance, M: float, rng: RandomSource, budget=None):
    return _copies_agent(template, template.budget if budget is None else budget, M, rng, "topk")


def solve_sched_pack_wl1(template: Instance, M: float, rng: RandomSource, budget=None):
    return _copies_agent(template, template.budget if budget is None else budget, M, rng, "wl1")


def solve_sched_pack_symmetric(template: Instance, M: float, rng: RandomSource, budget=None):
    budget = template.budget if budget is None else budget
    models, split, decode, agg, m = _outer(template)
    nm = agg.norm
    levels = symmetric_levels(nm, budget, m)
    bbar = levels[int(rng.stream("bbar").integers(0, len(levels)))]
    kap = kappa(nm, bbar, budget, m)
    if kap == 0:
        warnings.warn("kappa = 0: no machine fits the symmetric budget level; rejecting all jobs")
        agent = RejectAll(template, budget)
    else:
        rule = WeightedL1Rule([1.0] * m, float(kap), math.ceil(M - 1e-12), m)
        agent = _EngineAgent(template, budget, models, range(m), [bbar] * m, rule, M, rng, decode)
        agent._split = split
    agent.bbar, agent.kappa = bbar, kap
    agent.violation = violation_bound(template)
    return agent


def solve_sched_pack_nested(template: Instance, M: float, rng: RandomSource, budget=None):
    agg = template.aggregate
    if not (isinstance(agg, NormAgg) and isinstance(agg.norm, Nested)):
        raise ValueError("nested path needs a Nested aggregate")
    if len(agg.norm.blocks) and agg.norm.dim != template.m:
        raise ValueError("Nested blocks must partition the machines")
    return _dispatch_outer(template, M, rng, budget, NormAgg(agg.norm.outer))


def _dispatch_outer(template, M, rng, budget, outer_agg):
    nm = outer_agg.norm
    if isinstance(nm, Lp):
        return solve_sched_pack_lp(template, M, rng, budget)
    if isinstance(nm, TopK):
        return solve_sched_pack_topk(template, M, rng, budget)
    if isinstance(nm, WeightedL1):
        return solve_sched_pack_wl1(template, M, rng, budget)
    if is_symmetric(nm):
        return solve_sched_pack_symmetric(template, M, rng, budget)
    raise ValueError(f"no Sched-Pack solver for outer norm {nm.kind}")


def make_sched_pack_solver(template: Instance, budget: float, M: float, rng: RandomSource) -> PackAgent:
    """Pick the reduction matching the aggregate of ``template``."""
    agg = template.aggregate
    if isinstance(agg, (SumPowers, PNormPower)):
        return solve_sched_pack_pbounded(template, M, rng, budget)
    if isinstance(agg, NormAgg):
        if isinstance(agg.norm, Nested):
            return solve_sched_pack_nested(template, M, rng, budget)
        return _dispatch_outer(template, M, rng, budget, agg)
    raise ValueError(f"no Sched-Pack solver for aggregate {agg!r}")


def disjointify_blocks(blocks):
    """Hook for overlapping block families; only disjoint blocks are supported."""
    seen: set[int] = set()
    for idx in blocks:
        if seen.intersection(idx):
            raise NotImplementedError("overlapping blocks need a disjointification step")
        seen.update(idx)
    return [tuple(b) for b in blocks]
