"""Exact offline optima for the packing and covering problems.

Everything here is exhaustive but organised to stay cheap at desk scale:

* a machine's best load for every job subset is tabulated once (ways are
  chosen per machine, which is optimal because a machine's ways only affect
  its own load and the aggregate is monotone);
* separable aggregates (weighted sums, p-th powers, max) are combined across
  machines with a subset dynamic program run by the compiled kernel;
* anything else falls back to a pruned depth-first search.

Ways with infinite load are treated as unavailable.  Work is estimated up
front and compared against an :class:`OracleLimit`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .instance import (Assignment, BudgetedInstance, Instance, SetCoverInstance, assignment_cost,
                       gensched_to_osc, is_osc_shaped)
from .norms import (INF, ActAssign, LInf, Nested, NormAgg, NormSpec, WeightedL1, activation_cost,
                    eval_aggregate, eval_aggregate_rows, eval_norm, eval_norm_rows,
                    is_symmetric, leq, separable_power, separable_terms, symmetric_eval)


class OracleLimitExceeded(RuntimeError):
    pass


class InfeasibleInstance(ValueError):
    pass


@dataclass(frozen=True)
class OracleLimit:
    max_enumeration: int = 2 ** 22

    def check(self, work: float, what: str) -> None:
        if work > self.max_enumeration:
            raise OracleLimitExceeded(
                f"{what}: estimated work {work:.3g} exceeds limit {self.max_enumeration}")


DEFAULT_LIMIT = OracleLimit()


def _popcounts(size: int) -> np.ndarray:
    return np.bitwise_count(np.arange(size, dtype=np.uint64)).astype(np.int64)


def _members(S: int) -> list[int]:
    out, t = [], 0
    while S:
        if S & 1:
            out.append(t)
        S >>= 1
        t += 1
    return out


# ------------------------------------------------------------- Norm-Pack


def _finite_min_way(loads: np.ndarray) -> tuple[float, int]:
    """Smallest finite way load of one job and its lowest index (inf, -1 if none)."""
    best, k = INF, -1
    for kk, v in enumerate(loads):
        if v < best:
            best, k = float(v), kk
    return best, k


def _weighted_way_cost(norm: WeightedL1, loads: np.ndarray, base: int) -> tuple[float, int]:
    best, k = INF, -1
    for kk, v in enumerate(loads):
        if not math.isfinite(v):
            continue
        w = norm.weights[base + kk]
        c = 0.0 if w == 0 else w * float(v)
        if c < best:
            best, k = c, kk
    return best, k


def opt_norm_pack(norm: NormSpec, jobs: Sequence, B: float, *, job_ids: Optional[Sequence[int]] = None,
                  limit: OracleLimit = DEFAULT_LIMIT) -> tuple[int, list[tuple[int, int]]]:
    """Maximum number of jobs a single machine can take with load at most B.

    ``jobs`` holds per-way load vectors; ``job_ids`` gives each job's global
    index (coordinate ``id * r + k``), defaulting to list positions.  The
    witness lists ``(position, way)`` pairs.
    """
    jobs = [np.asarray(j, dtype=float).reshape(-1) for j in jobs]
    n = len(jobs)
    if n == 0:
        return 0, []
    r = len(jobs[0])
    ids = list(range(n)) if job_ids is None else list(job_ids)

    if isinstance(norm, LInf):
        wit = []
        for t, ld in enumerate(jobs):
            v, k = _finite_min_way(ld)
            if k >= 0 and leq(v, B):
                wit.append((t, k))
        return len(wit), wit

    if isinstance(norm, WeightedL1) and not is_symmetric(norm):
        # unit-value knapsack: the cheapest jobs first
        costs = [_weighted_way_cost(norm, ld, ids[t] * r) for t, ld in enumerate(jobs)]
        order = sorted((c, t, k) for t, (c, k) in enumerate(costs) if k >= 0)
        wit, total = [], 0.0
        for c, t, k in order:
            total += c
            if not leq(total, B):
                break
            wit.append((t, k))
        return len(wit), sorted(wit)

    if is_symmetric(norm):
        # longest feasible prefix of the jobs sorted by smallest load
        costs = [_finite_min_way(ld) for ld in jobs]
        order = sorted((c, t, k) for t, (c, k) in enumerate(costs) if k >= 0)
        wit, vals = [], []
        for c, t, k in order:
            vals.append(c)
            if not leq(symmetric_eval(norm, vals), B):
                break
            wit.append((t, k))
        return len(wit), sorted(wit)

    return _norm_pack_bruteforce(norm, jobs, B, ids, r, limit)


def _norm_pack_bruteforce(norm, jobs, B, ids, r, limit):
    n = len(jobs)
    limit.check((r + 1) ** n, "norm-pack enumeration")
    dim = norm.dim if norm.dim is not None else (max(ids) + 1) * r
    x = np.zeros(dim)
    best = [0, []]
    chosen: list[tuple[int, int]] = []

    def dfs(t: int) -> None:
        if len(chosen) + (n - t) <= best[0]:
            return
        if t == n:
            best[0], best[1] = len(chosen), list(chosen)
            return
        for k in range(r):
            v = jobs[t][k]
            if not math.isfinite(v):
                continue
            c = ids[t] * r + k
            x[c] = v
            if leq(eval_norm(norm, x), B):
                chosen.append((t, k))
                dfs(t + 1)
                chosen.pop()
            x[c] = 0.0
        dfs(t + 1)

    dfs(0)
    return best[0], best[1]


# ------------------------------------------------------- subset load tables


class SubsetLoads:
    """Best load of machine ``i`` for every subset of a job list."""

    def __init__(self, norm: NormSpec, way_loads: np.ndarray, job_ids: Sequence[int], r: int,
                 limit: OracleLimit):
        self.norm = norm
        self.loads = np.asarray(way_loads, dtype=float)  # (n, r)
        self.ids = list(job_ids)
        self.r = r
        n = len(self.ids)
        self.n = n
        size = 1 << n
        masks = (np.arange(size, dtype=np.int64)[:, None] >> np.arange(n)[None, :]) & 1
        masks = masks.astype(bool)
        self._fixed_ways: Optional[np.ndarray] = None

        if isinstance(norm, WeightedL1) and not is_symmetric(norm):
            per = [_weighted_way_cost(norm, self.loads[t], self.ids[t] * r) for t in range(n)]
        elif norm.dim is None or is_symmetric(norm) or (isinstance(norm, ActAssign) and r == 1):
            per = [_finite_min_way(self.loads[t]) for t in range(n)]
        else:
            per = None
        if per is not None:
            val = np.array([v for v, _ in per], dtype=float)
            self._fixed_ways = np.array([k for _, k in per], dtype=int)
            usable = self._fixed_ways >= 0
            val = np.where(usable, val, 0.0)
            X = np.where(masks, val[None, :], 0.0) if n else np.zeros((1, 0))
            if isinstance(norm, WeightedL1):
                w = 1.0 if not is_symmetric(norm) else (norm.weights[0] if norm.weights else 0.0)
                table = X.sum(axis=1) * w
            elif isinstance(norm, ActAssign):
                D = np.zeros((size, norm.dim))
                for t in range(n):
                    D[:, self.ids[t]] = X[:, t]
                table = eval_norm_rows(norm, D)
            else:
                table = eval_norm_rows(norm, X)
            if n and not usable.all():
                table = np.where(masks[:, ~usable].any(axis=1), INF, table)
            self.table = table
        else:
            limit.check((r + 1) ** n, "per-machine way enumeration")
            self.table = np.array([self._enumerate(S)[0] for S in range(size)])

    def _enumerate(self, S: int) -> tuple[float, tuple[int, ...]]:
        mem = _members(S)
        dim = self.norm.dim
        best, best_ways = INF, tuple(-1 for _ in mem)
        options = [[k for k in range(self.r) if math.isfinite(self.loads[t][k])] for t in mem]
        for ways in itertools.product(*options):
            x = np.zeros(dim)
            for t, k in zip(mem, ways):
                x[self.ids[t] * self.r + k] = self.loads[t][k]
            v = eval_norm(self.norm, x)
            if v < best:
                best, best_ways = v, ways
        return best, best_ways

    def ways(self, S: int) -> dict[int, int]:
        mem = _members(S)
        if self._fixed_ways is not None:
            return {t: int(self._fixed_ways[t]) for t in mem}
        return dict(zip(mem, self._enumerate(S)[1]))


def _tables(inst: Instance, limit: OracleLimit) -> list[SubsetLoads]:
    L = inst.loads()
    ids = list(range(inst.n))
    return [SubsetLoads(inst.inner_norms[i], L[:, i, :], ids, inst.r, limit) for i in range(inst.m)]


def _witness(inst: Instance, tables, parts: Sequence[int]) -> Assignment:
    a = Assignment(inst.m)
    for i, S in enumerate(parts):
        if S:
            for t, k in sorted(tables[i].ways(S).items()):
                a.place(t, i, k)
    return a


def _dp_chain(tables_g: list[np.ndarray], mode: str):
    """Fold machines with the subset kernel; returns value table and choices."""
    size = len(tables_g[0])
    prev = np.full(size, INF)
    prev[0] = 0.0 if mode == "sum" else -INF
    choices = []
    for g in tables_g:
        prev, ch = kernels.subset_dp(prev, g, mode)
        choices.append(ch)
    return prev, choices


def _dp_parts(choices, S: int) -> list[int]:
    parts = [0] * len(choices)
    for i in range(len(choices) - 1, -1, -1):
        T = int(choices[i][S])
        parts[i] = T
        S ^= T
    return parts


def _separable_chain(inst: Instance, limit: OracleLimit):
    """Subset-DP value table for separable aggregates.

    Returns ``(val, power, tables, parts)`` with ``val[S]`` the aggregate of
    the best assignment of job set S raised to ``power`` and ``parts(S)`` the
    per-machine job sets; None when the aggregate does not decompose.  A
    Nested norm decomposes when its outer norm and every block norm do: each
    block is folded first, then the blocks are folded with the outer terms.
    """
    n, m = inst.n, inst.m
    agg = inst.aggregate
    sep = separable_terms(agg, m)
    if sep is not None:
        limit.check(m * 3 ** n, "subset dynamic program")
        tables = _tables(inst, limit)
        mode, g = sep
        val, choices = _dp_chain([np.asarray(g[i](tables[i].table), dtype=float) for i in range(m)], mode)
        return val, separable_power(agg), tables, lambda S: _dp_parts(choices, S)
    if not (isinstance(agg, NormAgg) and isinstance(agg.norm, Nested)):
        return None
    nested = agg.norm
    outer = separable_terms(NormAgg(nested.outer), len(nested.blocks))
    inner = [separable_terms(NormAgg(spec), len(idx)) for idx, spec in nested.blocks]
    if outer is None or any(x is None for x in inner):
        return None
    limit.check((m + len(nested.blocks)) * 3 ** n, "nested subset dynamic program")
    tables = _tables(inst, limit)
    block_choices, outer_terms = [], []
    for b, (idx, spec) in enumerate(nested.blocks):
        mode, g = inner[b]
        v, ch = _dp_chain([np.asarray(g[t](tables[i].table), dtype=float) for t, i in enumerate(idx)], mode)
        block_choices.append(ch)
        with np.errstate(invalid="ignore"):
            norm_val = np.where(np.isfinite(v), np.maximum(v, 0.0) ** (1.0 / separable_power(NormAgg(spec))), INF)
        outer_terms.append(np.asarray(outer[1][b](norm_val), dtype=float))
    val, choices = _dp_chain(outer_terms, outer[0])

    def parts(S: int) -> list[int]:
        out = [0] * m
        for (idx, _), ch, Sb in zip(nested.blocks, block_choices, _dp_parts(choices, S)):
            for i, T in zip(idx, _dp_parts(ch, Sb)):
                out[i] = T
        return out
    return val, separable_power(NormAgg(nested.outer)), tables, parts


# -------------------------------------------------------------- Sched-Pack


def opt_sched_pack(inst: Instance, limit: OracleLimit = DEFAULT_LIMIT) -> tuple[int, Assignment]:
    """Maximum number of jobs schedulable with aggregate cost at most B."""
    n, m, B = inst.n, inst.m, inst.budget
    if n == 0:
        return 0, Assignment(m)
    if is_osc_shaped(inst):
        cnt, sets = opt_obcm(gensched_to_osc(inst), B, limit=limit)
        return cnt, _cover_witness(inst, sets)
    chain = _separable_chain(inst, limit)
    if chain is not None:
        val, pw, tables, parts = chain
        cap = B ** pw
        ok = np.array([leq(v, cap) for v in val])
        pc = _popcounts(len(val))
        score = np.where(ok, pc, -1)
        S = int(np.argmax(score))
        return int(pc[S]), _witness(inst, tables, parts(S))
    limit.check((m + 1) ** n, "assignment enumeration")
    tables = _tables(inst, limit)
    return _pack_dfs(inst, tables)


def _pack_dfs(inst: Instance, tables) -> tuple[int, Assignment]:
    n, m, B = inst.n, inst.m, inst.budget
    full = (1 << n) - 1
    loads = np.zeros(m)
    parts = [0] * m
    best = [0, [0] * m]

    def dfs(i: int, remaining: int, placed: int) -> None:
        if placed + bin(remaining).count("1") <= best[0] and i < m:
            return
        if i == m:
            if placed > best[0]:
                best[0], best[1] = placed, list(parts)
            return
        T = remaining
        while True:
            v = tables[i].table[T]
            if math.isfinite(v) or T == 0:
                loads[i] = v
                if leq(eval_aggregate(inst.aggregate, loads), B):
                    parts[i] = T
                    dfs(i + 1, remaining ^ T, placed + bin(T).count("1"))
                    parts[i] = 0
            if T == 0:
                break
            T = (T - 1) & remaining
        loads[i] = 0.0

    dfs(0, full, 0)
    return best[0], _witness(inst, tables, best[1])


def opt_gen_sched(inst: Instance, limit: OracleLimit = DEFAULT_LIMIT) -> tuple[float, Assignment]:
    """Minimum aggregate cost over assignments of every job."""
    n, m = inst.n, inst.m
    if n == 0:
        return 0.0, Assignment(m)
    L = inst.loads()
    for j in range(n):
        if not np.isfinite(L[j]).any():
            raise InfeasibleInstance(f"job {j} has no finite placement")
    if is_osc_shaped(inst):
        cost, sets = opt_osc(gensched_to_osc(inst), limit=limit)
        return cost, _cover_witness(inst, sets)
    full = (1 << n) - 1
    chain = _separable_chain(inst, limit)
    if chain is not None:
        val, _, tables, parts = chain
        if not math.isfinite(float(val[full])):
            raise InfeasibleInstance("no finite assignment")
        a = _witness(inst, tables, parts(full))
        return assignment_cost(inst, a), a
    limit.check(m ** n, "assignment enumeration")
    tables = _tables(inst, limit)
    loads = np.zeros(m)
    parts = [0] * m
    best = [INF, None]

    def dfs(i: int, remaining: int) -> None:
        if i == m:
            if remaining == 0:
                v = eval_aggregate(inst.aggregate, loads)
                if v < best[0]:
                    best[0], best[1] = v, list(parts)
            return
        T = remaining
        while True:
            v = tables[i].table[T]
            if math.isfinite(v):
                loads[i] = v
                if eval_aggregate(inst.aggregate, loads) < best[0]:
                    parts[i] = T
                    dfs(i + 1, remaining ^ T)
                    parts[i] = 0
            if T == 0:
                break
            T = (T - 1) & remaining
        loads[i] = 0.0

    dfs(0, full)
    if best[1] is None:
        raise InfeasibleInstance("no finite assignment")
    return best[0], _witness(inst, tables, best[1])


# ---------------------------------------------------- Budgeted-Sched-Pack


def feasible_activations(binst: BudgetedInstance) -> list[int]:
    """Inclusion-maximal activation sets (bitmasks) with f(b*y) <= B."""
    m = binst.m
    b = np.array(binst.machine_budgets)
    ok = []
    Y = ((np.arange(1 << m)[:, None] >> np.arange(m)[None, :]) & 1).astype(float)
    with np.errstate(invalid="ignore"):
        vals = eval_aggregate_rows(binst.aggregate, np.where(Y > 0, Y * b[None, :], 0.0))
    feas = [leq(float(v), binst.budget) for v in vals]
    for y in range(1 << m):
        if not feas[y]:
            continue
        if any(feas[y | (1 << i)] for i in range(m) if not y >> i & 1):
            continue
        ok.append(y)
    return ok


def opt_budgeted_sched_pack(binst: BudgetedInstance, limit: OracleLimit = DEFAULT_LIMIT
                            ) -> tuple[int, Assignment]:
    n, m = binst.n, binst.m
    if n == 0:
        return 0, Assignment(m)
    limit.check((1 << m) * m * 3 ** n, "budgeted enumeration")
    tables = _tables(binst, limit)
    feas = []
    for i in range(m):
        t = tables[i].table
        feas.append(np.array([0.0 if leq(v, binst.machine_budgets[i]) else INF for v in t]))
    pc = _popcounts(1 << n)
    best = (-1, None, None)
    for y in feasible_activations(binst):
        machines = _members(y)
        if not machines:
            if best[0] < 0:
                best = (0, y, [0] * m)
            continue
        val, choices = _dp_chain([feas[i] for i in machines], "max")
        score = np.where(val <= 0.0, pc, -1)
        S = int(np.argmax(score))
        if score[S] > best[0]:
            sub = _dp_parts(choices, S)
            parts = [0] * m
            for i, T in zip(machines, sub):
                parts[i] = T
            best = (int(score[S]), y, parts)
    if best[1] is None:
        return 0, Assignment(m)
    a = _witness(binst, tables, best[2])
    for i in _members(best[1]):
        a.activate(i)
    return best[0], a


# --------------------------------------------------------------- set cover


def _cover_tables(sc: SetCoverInstance, limit: OracleLimit):
    limit.check(1 << sc.m, "set family enumeration")
    if sc.n > 63:
        raise OracleLimitExceeded("set-cover oracle supports at most 63 elements")
    return kernels.cover_table(sc.set_masks(), sc.costs)


def opt_osc(sc: SetCoverInstance, limit: OracleLimit = DEFAULT_LIMIT) -> tuple[float, list[int]]:
    """Minimum-cost family covering every element (inf if impossible)."""
    if sc.n == 0:
        return 0.0, []
    if not sc.feasible:
        return INF, []
    cost, cov = _cover_tables(sc, limit)
    full = np.uint64((1 << sc.n) - 1)
    ok = (cov & full) == full
    c = np.where(ok, cost, INF)
    S = int(np.argmin(c))
    return float(c[S]), _members(S)


def opt_obcm(sc: SetCoverInstance, B: float, limit: OracleLimit = DEFAULT_LIMIT) -> tuple[int, list[int]]:
    """Most elements coverable by a family of total cost at most B."""
    if sc.n == 0:
        return 0, []
    cost, cov = _cover_tables(sc, limit)
    full = np.uint64((1 << sc.n) - 1)
    cnt = np.bitwise_count(cov & full).astype(np.int64)
    ok = np.array([leq(float(v), B) for v in cost])
    score = np.where(ok, cnt, -1)
    S = int(np.argmax(score))
    return int(score[S]), _members(S)


def _cover_witness(inst: Instance, sets: Sequence[int]) -> Assignment:
    a = Assignment(inst.m)
    for j in range(inst.n):
        for s in sorted(sets):
            if math.isfinite(inst.jobs[j][s, 0]):
                a.place(j, s, 0)
                break
    return a


# ---------------------------------------------------------- prefix tracker


class OptPrefixTracker:
    """Hindsight Sched-Pack optimum of the arrivals observed so far."""

    def __init__(self, template: Instance, budget: Optional[float] = None,
                 limit: OracleLimit = DEFAULT_LIMIT):
        self.template = template.template() if budget is None else template.template().with_budget(budget)
        self.limit = limit
        self.jobs: list[np.ndarray] = []
        self.value = 0

    def observe(self, job) -> int:
        self.jobs.append(np.asarray(job, dtype=float))
        new, _ = opt_sched_pack(self.template.with_jobs(self.jobs), self.limit)
        if new - self.value not in (0, 1):
            raise AssertionError(f"hindsight optimum jumped from {self.value} to {new}")
        self.value = new
        return new


def opt_prefix_tracker(inst: Instance, limit: OracleLimit = DEFAULT_LIMIT) -> OptPrefixTracker:
    return OptPrefixTracker(inst, limit=limit)
