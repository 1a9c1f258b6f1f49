"""Random activation-threshold engines for budgeted packing.

``OBCMEngine`` handles budgeted maximum coverage.  ``ActivationEngine``
handles Budgeted-Sched-Pack, either with a p-bounded aggregate (thresholds
driven by the current marginal) or with a weighted l1 aggregate (static
marginals and a two-part guess distribution).

Both engines may overshoot their budget by exactly one activation.  The
overshoot is removed by a fair coin that keeps either the machines activated
before it or only the violating machine.  ``budget_wrapper`` applies that
choice after a full run.  ``wrapper="online"`` flips the coin up front so a
cascade can learn at once whether a job was kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .instance import Assignment, BudgetedInstance, SetCoverInstance
from .norms import (INF, AggregateSpec, activation_cost, geq, leq, log2m, marginal)
from .rng import RandomSource, leading_zeros64
from .single_machine import NormMachine


# ------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class ThresholdDraw:
    value: float
    K: int
    k: int


def threshold_value(k: int, K: int) -> float:
    return max(0.0, 1.0 - k / K)


def threshold_support(K: int) -> list[tuple[float, float]]:
    """Exact (value, probability) pairs; masses for k >= K merge into 0."""
    if K < 1:
        raise ValueError("K must be >= 1")
    out = [(threshold_value(k, K), 2.0 ** (-k - 1)) for k in range(K)]
    out.append((0.0, 2.0 ** (-K)))
    return out


def sample_threshold_multiplier(K: int, gen: np.random.Generator) -> ThresholdDraw:
    """Geometric level from the leading zeros of a uniform 64-bit word."""
    if K < 1:
        raise ValueError("K must be >= 1")
    u = int(gen.integers(0, 2 ** 64, dtype=np.uint64))
    k = leading_zeros64(u)
    return ThresholdDraw(threshold_value(k, K), K, k)


def default_K(m: int, factor: int) -> int:
    return max(1, math.ceil(factor * log2m(m)))


# ------------------------------------------------------------------- OBCM


@dataclass
class OBCMResult:
    active: list[int]                 # activation order
    covered: dict[int, list[int]]     # C_i
    offered: dict[int, list[int]]     # O_i
    tau_bar: list[float]
    tau: list[float]
    violator: Optional[int]
    cost: float
    budget: float
    events: list[tuple] = field(default_factory=list)

    @property
    def covered_count(self) -> int:
        return sum(len(v) for v in self.covered.values())

    def kept_sets(self, coin: Optional[bool]) -> list[int]:
        """Sets kept by the wrapper; ``coin`` True keeps only the violator."""
        if self.violator is None or coin is None:
            return list(self.active)
        pos = self.active.index(self.violator)
        return [self.violator] if coin else self.active[:pos]

    def kept_covered(self, coin: Optional[bool]) -> int:
        return sum(len(self.covered[i]) for i in self.kept_sets(coin))


class OBCMEngine:
    """Threshold activation for budgeted maximum coverage."""

    def __init__(self, costs: Sequence[float], budget: float, opt_guess: float, *,
                 rng: Optional[RandomSource] = None, tau_bar: Optional[Sequence[float]] = None,
                 K: Optional[int] = None, wrapper: Optional[str] = None):
        m = len(costs)
        self.costs = [float(c) for c in costs]
        self.budget = float(budget)
        if not opt_guess > 0:
            raise ValueError("opt_guess must be positive")
        self.opt = float(opt_guess)
        self.K = default_K(m, 2) if K is None else K
        rng = rng or RandomSource(0)
        if tau_bar is None:
            tau_bar = [sample_threshold_multiplier(self.K, rng.stream("tau", i)).value for i in range(m)]
        self.tau_bar = [float(t) for t in tau_bar]
        self.tau = [self.tau_bar[i] * self.costs[i] / (2 * self.budget) * self.opt
                    if self.budget > 0 else INF for i in range(m)]
        self.usable = [c <= self.budget for c in self.costs]
        self.active: list[int] = []
        self.is_active = [False] * m
        self.covered: dict[int, list[int]] = {i: [] for i in range(m)}
        self.offered: dict[int, list[int]] = {i: [] for i in range(m)}
        self.spent = 0.0
        self.violator: Optional[int] = None
        self.events: list[tuple] = []
        self.wrapper = wrapper
        self.coin = rng.coin("wrapper") if wrapper == "online" else None

    def _committed(self, i: int) -> bool:
        if self.coin is None:
            return True
        if self.coin:
            return i == self.violator
        return self.violator is None or self.active.index(i) < self.active.index(self.violator)

    def offer(self, j: int, members: Sequence[int]) -> Optional[int]:
        """Process element j contained in ``members``; returns the covering set if kept."""
        members = sorted(members)
        for i in self.active:
            if i in members:
                self.covered[i].append(j)
                self.events.append(("accept", j, i))
                return i if self._committed(i) else None
        for i in members:
            if self.is_active[i] or not self.usable[i]:
                continue
            self.offered[i].append(j)
            self.events.append(("offer", j, i))
            if geq(len(self.offered[i]), self.tau[i]):
                if not leq(self.spent, self.budget):
                    self.events.append(("guard-stop", j, i))
                    continue
                self.active.append(i)
                self.is_active[i] = True
                self.spent += self.costs[i]
                if self.violator is None and not leq(self.spent, self.budget):
                    self.violator = i
                self.covered[i].append(j)
                self.events.append(("activate", j, i))
                return i if self._committed(i) else None
        self.events.append(("reject", j, -1))
        return None

    def result(self) -> OBCMResult:
        return OBCMResult(list(self.active), {i: list(v) for i, v in self.covered.items()},
                          {i: list(v) for i, v in self.offered.items()}, list(self.tau_bar),
                          list(self.tau), self.violator, self.spent, self.budget, list(self.events))


def run_obcm(sc: SetCoverInstance, B: float, opt_guess: float, rng: Optional[RandomSource] = None, *,
             tau_bar: Optional[Sequence[float]] = None, K: Optional[int] = None) -> OBCMResult:
    eng = OBCMEngine(sc.costs, B, opt_guess, rng=rng, tau_bar=tau_bar, K=K)
    for j, e in enumerate(sc.elements):
        eng.offer(j, e)
    return eng.result()


# ----------------------------------------------- Budgeted-Sched-Pack engine


@dataclass
class MachineRecord:
    index: int
    tau_bar: float
    active: bool = False
    time: Optional[int] = None       # position in the activation order
    offered: list[int] = field(default_factory=list)   # O_i
    post: list[int] = field(default_factory=list)      # jobs offered to the inner solver
    alg: list[tuple[int, int]] = field(default_factory=list)
    a: Optional[float] = None
    guess: Optional[float] = None
    guess_branch: Optional[str] = None
    dropped: bool = False

    @property
    def T(self) -> list[int]:
        return sorted(set(self.offered) | set(self.post))


@dataclass
class EngineResult:
    machines: list[MachineRecord]
    active: list[int]
    violator: Optional[int]
    declared_budget: float
    activation_value: float
    assignment: Assignment
    events: list[tuple]
    coin: Optional[bool] = None

    @property
    def scheduled(self) -> int:
        return self.assignment.count


class _Rule:
    """Threshold, guard and guess rules of one algorithm variant."""

    declared_budget: float

    def drop(self, i: int) -> bool: ...
    def current_a(self, i: int, y) -> float: ...
    def tau(self, tau_bar: float, a: float) -> float: ...
    def value(self, y) -> float: ...
    def guard_open(self, y) -> bool: ...
    def guess(self, i: int, a: float, gen: np.random.Generator) -> tuple[float, str]: ...


class PBoundedRule(_Rule):
    def __init__(self, aggregate: AggregateSpec, b: Sequence[float], B: float, s: float, opt: float, m: int):
        self.f, self.b, self.B, self.s, self.opt, self.m = aggregate, list(b), float(B), float(s), float(opt), m
        self.p = float(aggregate.p)
        self.declared_budget = self.s ** self.p * self.B
        self.levels = max(1, math.floor(2 * log2m(m)))

    def drop(self, i):
        e = [0.0] * self.m
        e[i] = 1.0
        return not leq(activation_cost(self.f, e, self.b), self.B)

    def current_a(self, i, y):
        return marginal(self.f, y, i, self.b)

    def tau(self, tau_bar, a):
        return tau_bar * self.opt * a / (10 * (self.s + 1) ** self.p * self.B) if self.B > 0 else INF

    def value(self, y):
        return activation_cost(self.f, y, self.b)

    def guard_open(self, y):
        v = self.value(y)
        return v < self.declared_budget and not math.isclose(v, self.declared_budget, rel_tol=1e-12)

    def guess(self, i, a, gen):
        k = int(gen.integers(1, self.levels + 1))
        return self.opt / 2 ** k, "dyadic"


class WeightedL1Rule(_Rule):
    """Static marginals ``a`` with the guard sum(a_i y_i) < B."""

    def __init__(self, a: Sequence[float], B: float, opt: float, m: int, force_dyadic: bool = False):
        self.aw = [float(x) for x in a]
        self.B, self.opt, self.m = float(B), float(opt), m
        self.declared_budget = self.B
        self.levels = max(1, math.floor(2 * log2m(m)))
        self.force_dyadic = force_dyadic

    def drop(self, i):
        return not leq(self.aw[i], self.B)

    def current_a(self, i, y):
        return self.aw[i]

    def tau(self, tau_bar, a):
        return tau_bar * self.opt * a / (20 * self.B) if self.B > 0 else INF

    def value(self, y):
        return float(sum(a for a, yy in zip(self.aw, y) if yy))

    def guard_open(self, y):
        v = self.value(y)
        return v < self.B and not math.isclose(v, self.B, rel_tol=1e-12)

    def guess(self, i, a, gen):
        # the dyadic level is drawn first so it matches the p-bounded rule's draw
        k = int(gen.integers(1, self.levels + 1))
        scaled = bool(gen.integers(0, 2))
        if scaled and not self.force_dyadic:
            return self.opt * a / (60 * self.B * log2m(self.m)), "scaled"
        return self.opt / 2 ** k, "dyadic"


class ActivationEngine:
    """Shared offering protocol of the two Budgeted-Sched-Pack algorithms.

    ``models[i]`` supplies ``pack_opt(offered, budget)`` and
    ``new_solver(budget, guess, rng)``; ``offer`` takes per-machine way loads.
    """

    def __init__(self, models: Sequence, b: Sequence[float], rule: _Rule, *, opt: float,
                 rng: Optional[RandomSource] = None, tau_bar: Optional[Sequence[float]] = None,
                 K: Optional[int] = None, test: str = "opt", wrapper: Optional[str] = None,
                 guesses: Optional[Sequence[Optional[float]]] = None):
        self.m = len(models)
        self.models = list(models)
        self.b = [float(x) for x in b]
        self.rule = rule
        if not opt > 0:
            raise ValueError("opt_guess must be positive")
        self.opt = float(opt)
        self.rng = rng or RandomSource(0)
        self.K = default_K(self.m, 3) if K is None else K
        if tau_bar is None:
            tau_bar = [sample_threshold_multiplier(self.K, self.rng.stream("tau", i)).value
                       for i in range(self.m)]
        self.rec = [MachineRecord(i, float(tau_bar[i])) for i in range(self.m)]
        for r in self.rec:
            r.dropped = rule.drop(r.index)
        self.test = test
        self.y = [0] * self.m
        self.active: list[int] = []
        self.solvers: dict[int, object] = {}
        self._offered_loads: dict[int, list] = {i: [] for i in range(self.m)}
        self.violator: Optional[int] = None
        self.assignment = Assignment(self.m)
        self.events: list[tuple] = []
        self.forced_guesses = guesses
        self.coin = self.rng.coin("wrapper") if wrapper == "online" else None

    # -- wrapper ------------------------------------------------------------
    def _committed(self, i: int) -> bool:
        if self.coin is None:
            return True
        if self.coin:
            return i == self.violator
        return self.violator is None or self.rec[i].time < self.rec[self.violator].time

    # -- protocol -----------------------------------------------------------
    def _try_solver(self, i: int, j: int, loads_i) -> Optional[int]:
        self.rec[i].post.append(j)
        k = self.solvers[i].offer(j, loads_i)
        if k is None:
            return None
        self.rec[i].alg.append((j, k))
        self.assignment.place(j, i, k)
        self.events.append(("accept", j, i))
        return k

    def _activate(self, i: int, j: int) -> None:
        r = self.rec[i]
        r.a = self.rule.current_a(i, self.y)
        r.active = True
        r.time = len(self.active)
        self.y[i] = 1
        self.active.append(i)
        self.assignment.activate(i)
        if self.forced_guesses is not None and self.forced_guesses[i] is not None:
            r.guess, r.guess_branch = float(self.forced_guesses[i]), "forced"
        else:
            r.guess, r.guess_branch = self.rule.guess(i, r.a, self.rng.stream("guess", i))
        # a zero guess and any guess below one job both mean "at least one job"
        self.solvers[i] = self.models[i].new_solver(self.b[i], max(r.guess, 1.0), self.rng.child("inner", i))
        if self.violator is None and not leq(self.rule.value(self.y), self.rule.declared_budget):
            self.violator = i
        self.events.append(("activate", j, i))

    def offer(self, j: int, loads) -> Optional[tuple[int, int]]:
        """Offer job j with ``loads[i]`` the way loads on machine i."""
        for i in list(self.active):
            k = self._try_solver(i, j, loads[i])
            if k is not None:
                return (i, k) if self._committed(i) else None
        for i in range(self.m):
            r = self.rec[i]
            if r.active or r.dropped:
                continue
            r.offered.append(j)
            self._offered_loads[i].append((j, np.asarray(loads[i], dtype=float)))
            self.events.append(("offer", j, i))
            if self.test == "count":
                score = len(r.offered)
            else:
                score = self.models[i].pack_opt(self._offered_loads[i], self.b[i])
            tau = self.rule.tau(r.tau_bar, self.rule.current_a(i, self.y))
            if not geq(score, tau):
                continue
            if not self.rule.guard_open(self.y):
                self.events.append(("guard-stop", j, i))
                continue
            self._activate(i, j)
            k = self._try_solver(i, j, loads[i])
            if k is not None:
                return (i, k) if self._committed(i) else None
        self.events.append(("reject", j, -1))
        return None

    def result(self) -> EngineResult:
        return EngineResult(self.rec, list(self.active), self.violator, self.rule.declared_budget,
                            self.rule.value(self.y), self.assignment, list(self.events), self.coin)


def _models_for(binst: BudgetedInstance, models):
    return models if models is not None else [NormMachine(nm, binst.r) for nm in binst.inner_norms]


def run_budgeted_pbounded(binst: BudgetedInstance, s: float, opt_guess: float, *,
                          models=None, rng: Optional[RandomSource] = None, **kw) -> EngineResult:
    """Thresholds follow the current marginal of a p-bounded aggregate."""
    rule = PBoundedRule(binst.aggregate, binst.machine_budgets, binst.budget, s, opt_guess, binst.m)
    eng = ActivationEngine(_models_for(binst, models), binst.machine_budgets, rule, opt=opt_guess,
                           rng=rng, **kw)
    for j, job in enumerate(binst.jobs):
        eng.offer(j, job)
    return eng.result()


def run_budgeted_wl1(binst: BudgetedInstance, weights: Sequence[float], opt_guess: float, *,
                     models=None, rng: Optional[RandomSource] = None, force_dyadic: bool = False,
                     **kw) -> EngineResult:
    """Static marginals a_i = w_i b_i with budget ``binst.budget``."""
    a = [float(w) * b if w > 0 else 0.0 for w, b in zip(weights, binst.machine_budgets)]
    rule = WeightedL1Rule(a, binst.budget, opt_guess, binst.m, force_dyadic)
    eng = ActivationEngine(_models_for(binst, models), binst.machine_budgets, rule, opt=opt_guess,
                           rng=rng, **kw)
    for j, job in enumerate(binst.jobs):
        eng.offer(j, job)
    return eng.result()


def budget_wrapper(res: EngineResult, coin: bool) -> Assignment:
    """Resolve a single overshooting activation after the run.

    ``coin`` False keeps machines activated before the violator, True keeps
    only the violator.  Without a violation the assignment is unchanged.
    """
    if res.violator is None:
        return res.assignment.copy()
    t = res.machines[res.violator].time
    if coin:
        keep = [res.violator]
    else:
        keep = [i for i in res.active if res.machines[i].time < t]
    return res.assignment.restricted_to(keep)
