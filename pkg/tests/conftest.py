"""Shared fixtures: independent brute-force oracles built only on norm evaluation.

These enumerate placements with ``itertools.product`` and never touch the
``ogsched.oracle`` module, so they serve as ground truth for it.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from ogsched.norms import eval_aggregate, eval_norm

TOL = 1e-9


def _le(a, b):
    return a <= b + TOL * max(1.0, abs(b))


def machine_value(norm, entries, dim):
    """Norm of a dense vector carrying ``entries`` = [(coord, value)]."""
    d = norm.dim if norm.dim is not None else dim
    x = np.zeros(d)
    for c, v in entries:
        x[c] = v
    return eval_norm(norm, x)


def _loads(inst, choice):
    per = [[] for _ in range(inst.m)]
    for j, ch in enumerate(choice):
        if ch is not None:
            i, k = ch
            per[i].append((j * inst.r + k, float(inst.jobs[j][i, k])))
    return [machine_value(inst.inner_norms[i], per[i], inst.n * inst.r) if per[i] else 0.0
            for i in range(inst.m)]


def _options(inst, allow_none):
    opts = [(i, k) for i in range(inst.m) for k in range(inst.r)]
    return ([None] if allow_none else []) + opts


def bf_sched_pack(inst) -> int:
    best = 0
    for choice in itertools.product(_options(inst, True), repeat=inst.n):
        cnt = sum(c is not None for c in choice)
        if cnt <= best:
            continue
        if any(c is not None and not math.isfinite(inst.jobs[j][c]) for j, c in enumerate(choice)):
            continue
        if _le(eval_aggregate(inst.aggregate, _loads(inst, choice)), inst.budget):
            best = cnt
    return best


def bf_gen_sched(inst) -> float:
    best = math.inf
    for choice in itertools.product(_options(inst, False), repeat=inst.n):
        if any(not math.isfinite(inst.jobs[j][c]) for j, c in enumerate(choice)):
            continue
        best = min(best, eval_aggregate(inst.aggregate, _loads(inst, choice)))
    return best if inst.n else 0.0


def bf_budgeted(binst) -> int:
    m, best = binst.m, 0
    b = binst.machine_budgets
    for y in itertools.product((0, 1), repeat=m):
        if not _le(eval_aggregate(binst.aggregate, [yy * bb for yy, bb in zip(y, b)]), binst.budget):
            continue
        opts = [None] + [(i, k) for i in range(m) if y[i] for k in range(binst.r)]
        for choice in itertools.product(opts, repeat=binst.n):
            cnt = sum(c is not None for c in choice)
            if cnt <= best:
                continue
            if any(c is not None and not math.isfinite(binst.jobs[j][c]) for j, c in enumerate(choice)):
                continue
            loads = _loads(binst, choice)
            if all(_le(loads[i], b[i]) for i in range(m)):
                best = cnt
    return best


def bf_norm_pack(norm, jobs, B, job_ids=None) -> int:
    """Max jobs on one machine; ``jobs`` are per-way load vectors."""
    n = len(jobs)
    if n == 0:
        return 0
    r = len(jobs[0])
    ids = list(range(n)) if job_ids is None else list(job_ids)
    dim = (max(ids) + 1) * r
    best = 0
    for choice in itertools.product([None] + list(range(r)), repeat=n):
        cnt = sum(c is not None for c in choice)
        if cnt <= best:
            continue
        ent = [(ids[t] * r + k, float(jobs[t][k])) for t, k in enumerate(choice) if k is not None]
        if any(not math.isfinite(v) for _, v in ent):
            continue
        if _le(machine_value(norm, ent, dim), B):
            best = cnt
    return best


def bf_osc(sc) -> float:
    best = math.inf
    for mask in range(1 << sc.m):
        sets = {i for i in range(sc.m) if mask >> i & 1}
        if all(sets.intersection(e) for e in sc.elements):
            best = min(best, sum(sc.costs[i] for i in sets))
    return best


def bf_obcm(sc, B) -> int:
    best = 0
    for mask in range(1 << sc.m):
        sets = {i for i in range(sc.m) if mask >> i & 1}
        if _le(sum(sc.costs[i] for i in sets), B):
            best = max(best, sum(1 for e in sc.elements if sets.intersection(e)))
    return best


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


# ------------------------------------------------ acceptance summary lines

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
