"""Covering problems solved by cascades of packing agents.

An *agent* is an online Sched-Pack algorithm (see ``reductions``); it either
commits a placement for a job or passes.  Covering algorithms route each job
through a sequence of agents until one commits.

* ``PartialScheduler``: ceil(log2 n) + 1 groups of N agents, group k using the
  estimate n / 2^k, all with the same aggregate budget.
* ``run_gen_sched``: guess-and-double over the budget; within a phase a lazy
  sequence of partial schedulers runs until every job is placed.
* ``run_gen_sched_norm``: the layered reduction for norm aggregates, which
  splits each layer into subinstances at hindsight-optimum checkpoints.
* ``run_osc``: the layered reduction on the set-cover encoding with budgeted
  maximum coverage agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .budgeted import OBCMEngine
from .instance import (Assignment, Instance, SetCoverInstance, assignment_cost,
                       osc_to_gensched)
from .norms import homogeneity_degree, log2m
from .oracle import (DEFAULT_LIMIT, InfeasibleInstance, OptPrefixTracker, OracleLimit, opt_gen_sched,
                     opt_sched_pack)
from .reductions import PackAgent, make_sched_pack_solver
from .rng import RandomSource

# factory(template, budget, M, rng) -> agent
AgentFactory = Callable[[Instance, float, float, RandomSource], PackAgent]

MAX_CASCADE = 10_000


def default_alpha(m: int) -> float:
    """Solvability constant of the threshold algorithms, clamped to at most 1."""
    return min(1.0, 1.0 / (17.0 * log2m(m)))


# ------------------------------------------------------------ OBCM agents


class OBCMAgent(PackAgent):
    """Budgeted maximum coverage as a Sched-Pack agent on the set-cover encoding."""

    violation = 1.0

    def __init__(self, template: Instance, costs: Sequence[float], budget: float, M: float,
                 rng: RandomSource, tau_bar: Optional[Sequence[float]] = None):
        super().__init__(template, budget)
        self.engine = OBCMEngine(costs, budget, max(float(M), 1.0), rng=rng, tau_bar=tau_bar,
                                 wrapper="online")

    def _offer(self, j, loads):
        members = [i for i in range(self.template.m) if math.isfinite(loads[i, 0])]
        i = self.engine.offer(j, members)
        return None if i is None else (i, 0)


def obcm_factory(costs: Sequence[float], tau_bar: Optional[Sequence[float]] = None) -> AgentFactory:
    costs = tuple(float(c) for c in costs)

    def make(template, budget, M, rng):
        return OBCMAgent(template, costs, budget, M, rng, tau_bar=tau_bar)
    return make


def default_factory(template: Instance, budget: float, M: float, rng: RandomSource) -> PackAgent:
    return make_sched_pack_solver(template, budget, M, rng)


# ------------------------------------------------------ partial scheduler


def partial_agent_count(n: int, alpha: float) -> int:
    """N = ceil((10 ln(2 log n) + 2) / alpha), with log n clamped to at least 1."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    logn = max(1.0, math.log2(max(n, 1)))
    return math.ceil((10 * math.log(2 * logn) + 2) / alpha)


def partial_groups(n: int) -> int:
    return math.ceil(math.log2(n)) + 1 if n > 1 else 1


@dataclass
class AgentRecord:
    group: int
    estimate: float
    agent: PackAgent


class PartialScheduler:
    """Cascade of grouped agents; agents are created when a job first reaches them."""

    def __init__(self, template: Instance, budget: float, n: int, alpha: float, rng: RandomSource,
                 factory: AgentFactory = default_factory):
        self.template, self.budget, self.n = template, float(budget), max(int(n), 1)
        self.rng, self.factory = rng, factory
        self.N = partial_agent_count(self.n, alpha)
        self.groups = partial_groups(self.n)
        self.agents: list[AgentRecord] = []

    @property
    def capacity(self) -> int:
        return self.N * self.groups

    def _agent(self, t: int) -> AgentRecord:
        while len(self.agents) <= t:
            s = len(self.agents)
            k = s // self.N + 1
            M = self.n / 2 ** k
            ag = self.factory(self.template, self.budget, M, self.rng.child("agent", s))
            self.agents.append(AgentRecord(k, M, ag))
        return self.agents[t]

    def offer(self, j: int, loads) -> Optional[tuple[int, int]]:
        for t in range(self.capacity):
            res = self._agent(t).agent.offer(j, loads)
            if res is not None:
                return res
        return None

    def agent_costs(self, inst: Instance) -> list[float]:
        return [assignment_cost(inst, a.agent.assignment) for a in self.agents]


@dataclass
class PartialResult:
    assignment: Assignment
    scheduler: PartialScheduler

    @property
    def complete(self) -> bool:
        return self.assignment.count == self.scheduler.n


def run_partial_scheduler(inst: Instance, opt_hat: float, *, alpha: float, rng: RandomSource,
                          factory: AgentFactory = default_factory) -> PartialResult:
    ps = PartialScheduler(inst.template(), opt_hat, inst.n, alpha, rng, factory)
    a = Assignment(inst.m)
    for j, job in enumerate(inst.jobs):
        res = ps.offer(j, job)
        if res is not None:
            a.place(j, *res)
    return PartialResult(a, ps)


class PartialCascade:
    """Unbounded lazy sequence of partial schedulers; always places a feasible job."""

    def __init__(self, template, budget, n, alpha, rng, factory, max_schedulers=MAX_CASCADE):
        self.args = (template, budget, n, alpha)
        self.rng, self.factory = rng, factory
        self.schedulers: list[PartialScheduler] = []
        self.max_schedulers = max_schedulers

    @property
    def tau(self) -> int:
        return len(self.schedulers)

    def offer(self, j, loads):
        t = 0
        while True:
            if t == len(self.schedulers):
                if t >= self.max_schedulers:
                    raise RuntimeError(f"job {j} rejected by {t} partial schedulers")
                self.schedulers.append(PartialScheduler(*self.args, self.rng.child("scheduler", t),
                                                        self.factory))
            res = self.schedulers[t].offer(j, loads)
            if res is not None:
                return res
            t += 1


# -------------------------------------------------------- layered (p = 1)


def layer_values(n: int, alpha: float) -> list[float]:
    """L_k = n (1 - alpha/4)^k for k = 0..N, N least with n (1 - alpha/4)^(N+1) <= 2."""
    q = 1 - alpha / 4
    out = [float(n)]
    while n * q ** len(out) > 2:
        out.append(n * q ** len(out))
    return out


@dataclass
class Layer:
    L: float
    M: int
    tracker: OptPrefixTracker
    jobs: list[int] = field(default_factory=list)     # jobs that entered this layer
    checkpoints: list[int] = field(default_factory=list)
    agents: list[PackAgent] = field(default_factory=list)


class LayeredScheduler:
    """Layer k solves its stream with estimate floor(L_k / 2), restarting the
    agent each time the layer's hindsight optimum reaches a multiple of it.
    Jobs rejected by every layer are placed greedily."""

    def __init__(self, template: Instance, budget: float, n: int, alpha: float, rng: RandomSource,
                 factory: AgentFactory = default_factory, limit: OracleLimit = DEFAULT_LIMIT):
        self.template, self.budget, self.rng, self.factory = template, float(budget), rng, factory
        self.layers = [Layer(L, max(1, math.floor(L / 2)), OptPrefixTracker(template, budget, limit))
                       for L in layer_values(max(n, 1), alpha)]
        self.placed: list[tuple[np.ndarray, int, int]] = []
        self.stragglers: list[int] = []

    @property
    def depth(self) -> int:
        """Number of layers some job reached."""
        return sum(1 for ly in self.layers if ly.jobs)

    def _agent(self, k: int) -> PackAgent:
        ly = self.layers[k]
        if not ly.agents:
            ly.agents.append(self.factory(self.template, self.budget, ly.M, self.rng.child("layer", k, 0)))
        return ly.agents[-1]

    def offer(self, j: int, loads) -> tuple[int, int]:
        loads = np.asarray(loads, dtype=float)
        for k, ly in enumerate(self.layers):
            ly.jobs.append(j)
            agent = self._agent(k)
            opt = ly.tracker.observe(loads)
            res = agent.offer(j, loads)
            if opt == (len(ly.checkpoints) + 1) * ly.M:
                ly.checkpoints.append(j)
                ly.agents.append(self.factory(self.template, self.budget, ly.M,
                                              self.rng.child("layer", k, len(ly.agents))))
            if res is not None:
                self.placed.append((loads, *res))
                return res
        self.stragglers.append(j)
        res = greedy_placement(self.template, self.placed, loads)
        self.placed.append((loads, *res))
        return res


def layer_residuals(inst: Instance, sched: LayeredScheduler, limit: OracleLimit = DEFAULT_LIMIT
                    ) -> list[int]:
    """Sched-Pack optimum (budget of the scheduler) of the jobs entering each layer,
    followed by that of the stragglers."""
    t = inst.template().with_budget(sched.budget)
    streams = [ly.jobs for ly in sched.layers] + [sched.stragglers]
    return [opt_sched_pack(t.with_jobs([inst.jobs[j] for j in js]), limit)[0] if js else 0 for js in streams]


def greedy_placement(template: Instance, placed: Sequence[tuple[np.ndarray, int, int]], loads
                     ) -> tuple[int, int]:
    """Placement of smallest marginal aggregate increase given earlier placements."""
    jobs = [ld for ld, _, _ in placed] + [np.asarray(loads, dtype=float)]
    inst = template.with_jobs(jobs)
    a = Assignment(template.m)
    for t, (_, i, k) in enumerate(placed):
        a.place(t, i, k)
    last = len(placed)
    best, arg = math.inf, None
    for i in range(template.m):
        for k in range(template.r):
            if not math.isfinite(jobs[-1][i, k]):
                continue
            b = a.copy()
            b.place(last, i, k)
            v = assignment_cost(inst, b)
            if v < best:
                best, arg = v, (i, k)
    if arg is None:
        raise InfeasibleInstance("job has no finite placement")
    return arg


# ---------------------------------------------------------- guess-and-double


@dataclass
class PhaseRecord:
    opt_hat: float
    start: int
    placed: list[int] = field(default_factory=list)
    algo: object = None

    @property
    def tau(self) -> Optional[int]:
        return getattr(self.algo, "tau", None)

    @property
    def depth(self) -> Optional[int]:
        return getattr(self.algo, "depth", None)


@dataclass
class CoverResult:
    assignment: Assignment
    cost: float
    phases: list[PhaseRecord]
    hindsight: list[float]
    zero_cost: list[int] = field(default_factory=list)

    @property
    def tau(self) -> Optional[int]:
        """Largest number of agents (partial schedulers) any phase used; None for layered runs."""
        vals = [ph.tau for ph in self.phases if ph.tau is not None]
        return max(vals) if vals else None

    @property
    def depth(self) -> Optional[int]:
        """Deepest layer reached in any phase of a layered run."""
        vals = [ph.depth for ph in self.phases if ph.depth is not None]
        return max(vals) if vals else None

    @property
    def complete(self) -> bool:
        return self.assignment.count == len(self.hindsight)


def _doubling(inst: Instance, make_phase, rng: RandomSource, limit: OracleLimit,
              budget: Optional[float] = None) -> CoverResult:
    """Guess-and-double driver.

    A new phase starts whenever the hindsight optimum exceeds the estimate;
    it sees every earlier job as context but only its own arrivals are
    committed.  With ``budget`` given there is a single phase.
    """
    p = homogeneity_degree(inst.aggregate)
    a = Assignment(inst.m)
    phases: list[PhaseRecord] = []
    hindsight: list[float] = []
    zero: list[int] = []
    phase: Optional[PhaseRecord] = None
    if budget is not None:
        phase = PhaseRecord(float(budget), 0, algo=make_phase(float(budget), rng.child("phase", 0)))
        phases.append(phase)
    for j, job in enumerate(inst.jobs):
        opt = float(budget) if budget is not None else opt_gen_sched(inst.with_jobs(inst.jobs[:j + 1]), limit)[0]
        hindsight.append(opt)
        if budget is None and opt > 0 and (phase is None or opt > phase.opt_hat * (1 + 1e-12)):
            est = opt if phase is None else phase.opt_hat
            while est < opt * (1 - 1e-12):
                est *= 2 ** p
            phase = PhaseRecord(est, j, algo=make_phase(est, rng.child("phase", len(phases))))
            phases.append(phase)
            for t in range(j):
                phase.algo.offer(t, inst.jobs[t])
        if phase is None:
            # nothing positive seen yet: a zero-cost placement exists
            i, k = greedy_placement(inst.template(), [(inst.jobs[t], *a.placements[t]) for t in range(j)], job)
            a.place(j, i, k)
            zero.append(j)
            continue
        res = phase.algo.offer(j, job)
        if res is None:
            raise RuntimeError(f"job {j} was not placed")
        a.place(j, *res)
        phase.placed.append(j)
    return CoverResult(a, assignment_cost(inst, a), phases, hindsight, zero)


def run_gen_sched(inst: Instance, *, alpha: Optional[float] = None, rng: Optional[RandomSource] = None,
                  factory: AgentFactory = default_factory, limit: OracleLimit = DEFAULT_LIMIT,
                  budget: Optional[float] = None, max_schedulers: int = MAX_CASCADE) -> CoverResult:
    """Place every job: doubling phases, each a lazy cascade of partial schedulers."""
    alpha = default_alpha(inst.m) if alpha is None else alpha
    rng = rng or RandomSource(0)
    template = inst.template()

    def make_phase(opt_hat, prng):
        return PartialCascade(template, opt_hat, inst.n, alpha, prng, factory, max_schedulers)
    return _doubling(inst, make_phase, rng, limit, budget)


def run_gen_sched_norm(inst: Instance, *, alpha: Optional[float] = None, rng: Optional[RandomSource] = None,
                       factory: AgentFactory = default_factory, limit: OracleLimit = DEFAULT_LIMIT,
                       budget: Optional[float] = None) -> CoverResult:
    """Layered reduction for norm aggregates; n is taken from the instance."""
    if homogeneity_degree(inst.aggregate) != 1.0:
        raise ValueError("the layered reduction needs a norm aggregate")
    alpha = default_alpha(inst.m) if alpha is None else alpha
    rng = rng or RandomSource(0)
    template = inst.template()

    def make_phase(opt_hat, prng):
        return LayeredScheduler(template, opt_hat, inst.n, alpha, prng, factory, limit)
    return _doubling(inst, make_phase, rng, limit, budget)


@dataclass
class OSCResult:
    sets: list[int]
    cost: float
    result: CoverResult

    @property
    def covered(self) -> int:
        return self.result.assignment.count


def run_osc(sc: SetCoverInstance, rng: Optional[RandomSource] = None, *, alpha: Optional[float] = None,
            limit: OracleLimit = DEFAULT_LIMIT, budget: Optional[float] = None) -> OSCResult:
    """Online set cover through the layered reduction with coverage agents.

    A set is bought once, when the first committed element uses it, so the
    cost is that of the final assignment.
    """
    if not sc.feasible:
        raise InfeasibleInstance("an element lies in no set")
    inst = osc_to_gensched(sc)
    res = run_gen_sched_norm(inst, alpha=default_alpha(sc.m) if alpha is None else alpha, rng=rng,
                             factory=obcm_factory(sc.costs), limit=limit, budget=budget)
    return _osc_result(sc, res)


def _osc_result(sc: SetCoverInstance, res: CoverResult) -> OSCResult:
    sets = [i for i, y in enumerate(res.assignment.y) if y]
    return OSCResult(sets, sc.cover_cost(sets), res)


def run_osc_sketch(sc: SetCoverInstance, rng: Optional[RandomSource] = None, *,
                   alpha: Optional[float] = None, max_agents: int = MAX_CASCADE) -> OSCResult:
    """Experimental plain cascade: agent k uses the estimate (1 - alpha)^(k-1) n.

    The agents are the randomized coverage engines, so none of the
    deterministic-agent analysis applies; kept for comparison only.
    """
    inst = osc_to_gensched(sc)
    alpha = default_alpha(sc.m) if alpha is None else alpha
    rng = rng or RandomSource(0)
    factory = obcm_factory(sc.costs)
    template = inst.template()

    class _Sketch:
        def __init__(self, opt_hat, prng):
            self.opt_hat, self.rng, self.agents = opt_hat, prng, []

        @property
        def tau(self):
            return len(self.agents)

        def offer(self, j, loads):
            t = 0
            while True:
                if t == len(self.agents):
                    if t >= max_agents:
                        raise RuntimeError(f"element {j} rejected by {t} agents")
                    est = max(1.0, (1 - alpha) ** t * sc.n)
                    self.agents.append(factory(template, self.opt_hat, est, self.rng.child("agent", t)))
                res = self.agents[t].offer(j, loads)
                if res is not None:
                    return res
                t += 1

    return _osc_result(sc, _doubling(inst, _Sketch, rng, DEFAULT_LIMIT))


# ------------------------------------------------------- martingale tail


def martingale_event(pairs: Sequence[tuple[float, float]], beta: float, lam: float) -> bool:
    """{sum Y <= beta and sum E[Y | past] >= beta + lam} for (mean, outcome) pairs."""
    if lam < beta + 1:
        raise ValueError("the tail bound needs lambda >= beta + 1")
    s_y = sum(y for _, y in pairs)
    s_mu = sum(mu for mu, _ in pairs)
    return s_y <= beta and s_mu >= beta + lam


@dataclass(frozen=True)
class TailVerdict:
    frequency: float
    bound: float
    sigma: float
    trials: int

    @property
    def ok(self) -> bool:
        return self.frequency <= self.bound + 3 * self.sigma


def tail_bound(lam: float) -> float:
    return math.exp(-3.0 * lam / 14.0)


def martingale_tail_check(samples: Sequence[Sequence[tuple[float, float]]], beta: float, lam: float
                          ) -> TailVerdict:
    """Empirical frequency of the tail event against exp(-3 lam / 14)."""
    if lam < beta + 1:
        raise ValueError("the tail bound needs lambda >= beta + 1")
    for seq in samples:
        for _, y in seq:
            if not 0 <= y <= 1:
                raise ValueError("outcomes must lie in [0, 1]")
    T = len(samples)
    if T == 0:
        raise ValueError("no samples")
    hits = sum(martingale_event(seq, beta, lam) for seq in samples)
    f = hits / T
    return TailVerdict(f, tail_bound(lam), math.sqrt(f * (1 - f) / T), T)


def tail_check_counts(values: Sequence[int], v: float) -> TailVerdict:
    """Pr(tau > v) against exp(-(3/14)(v/2))."""
    T = len(values)
    f = sum(x > v for x in values) / T
    return TailVerdict(f, tail_bound(v / 2), math.sqrt(f * (1 - f) / T), T)
