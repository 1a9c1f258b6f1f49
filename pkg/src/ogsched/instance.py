"""Instances, online streams, assignments and load accounting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .norms import (INF, AggregateSpec, NormAgg, NormSpec, LInf, WeightedL1,
                    aggregate_from_json, aggregate_to_json, eval_aggregate,
                    eval_norm, norm_from_json, norm_to_json, symmetric_eval)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def as_job(loads, m: int, r: int) -> np.ndarray:
    arr = np.asarray(loads, dtype=float).reshape(m, r)
    if np.isnan(arr).any() or (arr < 0).any():
        raise ValueError("job loads must be nonnegative (inf allowed)")
    return _frozen(arr)


@dataclass(frozen=True)
class Instance:
    m: int
    r: int
    inner_norms: tuple
    aggregate: AggregateSpec
    budget: float
    jobs: tuple = ()

    def __post_init__(self):
        if self.m < 1 or self.r < 1:
            raise ValueError("need m >= 1 and r >= 1")
        if len(self.inner_norms) != self.m:
            raise ValueError("one inner norm per machine")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        object.__setattr__(self, "inner_norms", tuple(self.inner_norms))
        object.__setattr__(self, "jobs", tuple(as_job(j, self.m, self.r) for j in self.jobs))

    @property
    def n(self) -> int:
        return len(self.jobs)

    def loads(self) -> np.ndarray:
        """All loads as an (n, m, r) array."""
        if not self.jobs:
            return np.zeros((0, self.m, self.r))
        return np.stack(self.jobs)

    def with_jobs(self, jobs: Sequence) -> "Instance":
        return replace(self, jobs=tuple(jobs))

    def with_budget(self, budget: float) -> "Instance":
        return replace(self, budget=float(budget))

    def template(self) -> "Instance":
        return replace(self, jobs=())


@dataclass(frozen=True)
class BudgetedInstance(Instance):
    machine_budgets: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        mb = tuple(float(b) for b in self.machine_budgets)
        if len(mb) != self.m:
            raise ValueError("one machine budget per machine")
        if any(b < 0 for b in mb):
            raise ValueError("machine budgets must be nonnegative")
        object.__setattr__(self, "machine_budgets", mb)


class PlacementError(RuntimeError):
    pass


class Assignment:
    """Partial schedule: job -> (machine, way) plus activation flags.

    Placements are irrevocable; placing on a machine activates it.
    """

    def __init__(self, m: int):
        self.m = m
        self.placements: dict[int, tuple[int, int]] = {}
        self.y = [0] * m

    def activate(self, i: int) -> None:
        self.y[i] = 1

    def place(self, j: int, i: int, k: int) -> None:
        if j in self.placements:
            raise PlacementError(f"job {j} is already placed")
        self.placements[j] = (int(i), int(k))
        self.y[i] = 1

    def on_machine(self, i: int) -> list[tuple[int, int]]:
        return sorted((j, k) for j, (ii, k) in self.placements.items() if ii == i)

    @property
    def count(self) -> int:
        return len(self.placements)

    def copy(self) -> "Assignment":
        a = Assignment(self.m)
        a.placements = dict(self.placements)
        a.y = list(self.y)
        return a

    def restricted_to(self, machines) -> "Assignment":
        keep = set(machines)
        a = Assignment(self.m)
        for j, (i, k) in self.placements.items():
            if i in keep:
                a.placements[j] = (i, k)
        a.y = [1 if (self.y[i] and i in keep) else 0 for i in range(self.m)]
        return a

    def to_json(self) -> dict:
        return {"placements": {str(j): list(v) for j, v in sorted(self.placements.items())},
                "y": list(self.y)}

    def __repr__(self) -> str:
        return f"Assignment({dict(sorted(self.placements.items()))}, y={self.y})"


def sparse_load(norm: NormSpec, entries: Sequence[tuple[int, float]], dim: Optional[int] = None) -> float:
    """Norm of the vector whose listed coordinates carry the given values."""
    if not entries:
        return 0.0
    if norm.dim is None:
        return symmetric_eval(norm, [v for _, v in entries])
    return eval_norm(norm, _dense(entries, norm.dim))


def _dense(entries, dim):
    if dim is None:
        dim = max(c for c, _ in entries) + 1
    x = np.zeros(dim)
    for c, v in entries:
        x[c] = v
    return x


def machine_entries(inst: Instance, a: Assignment, i: int) -> list[tuple[int, float]]:
    return [(j * inst.r + k, float(inst.jobs[j][i, k])) for j, k in a.on_machine(i)]


def machine_load(inst: Instance, a: Assignment, i: int) -> float:
    return sparse_load(inst.inner_norms[i], machine_entries(inst, a, i), inst.n * inst.r)


def machine_loads(inst: Instance, a: Assignment) -> np.ndarray:
    return np.array([machine_load(inst, a, i) for i in range(inst.m)])


def assignment_cost(inst: Instance, a: Assignment) -> float:
    return eval_aggregate(inst.aggregate, machine_loads(inst, a))


# ------------------------------------------------------------------ set cover


@dataclass(frozen=True)
class SetCoverInstance:
    costs: tuple
    elements: tuple  # element -> tuple of set indices, in arrival order

    def __post_init__(self):
        costs = tuple(float(c) for c in self.costs)
        if not costs or any(not c > 0 for c in costs):
            raise ValueError("set costs must be positive")
        elems = tuple(tuple(sorted(set(int(s) for s in e))) for e in self.elements)
        for e in elems:
            if any(s < 0 or s >= len(costs) for s in e):
                raise ValueError("set index out of range")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "elements", elems)

    @property
    def m(self) -> int:
        return len(self.costs)

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def feasible(self) -> bool:
        return all(self.elements)

    def set_masks(self) -> list[int]:
        """Bitmask of elements per set."""
        masks = [0] * self.m
        for j, e in enumerate(self.elements):
            for s in e:
                masks[s] |= 1 << j
        return masks

    def cover_cost(self, sets) -> float:
        return float(sum(self.costs[s] for s in set(sets)))

    def prefix(self, n: int) -> "SetCoverInstance":
        return SetCoverInstance(self.costs, self.elements[:n])


def osc_to_gensched(sc: SetCoverInstance) -> Instance:
    jobs = []
    for e in sc.elements:
        row = [[sc.costs[i]] if i in e else [INF] for i in range(sc.m)]
        jobs.append(row)
    return Instance(m=sc.m, r=1, inner_norms=tuple(LInf() for _ in range(sc.m)),
                    aggregate=NormAgg(WeightedL1([1.0] * sc.m)), budget=0.0, jobs=tuple(jobs))


def is_osc_shaped(inst: Instance) -> bool:
    """True if ``inst`` has the set-cover encoding shape (sets as machines)."""
    if inst.r != 1 or not all(isinstance(nm, LInf) for nm in inst.inner_norms):
        return False
    agg = inst.aggregate
    if not (isinstance(agg, NormAgg) and isinstance(agg.norm, WeightedL1)
            and all(w == 1.0 for w in agg.norm.weights)):
        return False
    L = inst.loads()
    for i in range(inst.m):
        vals = {v for v in L[:, i, 0] if math.isfinite(v)}
        if len(vals) > 1:
            return False
    return True


def gensched_to_osc(inst: Instance) -> SetCoverInstance:
    """Inverse of ``osc_to_gensched``.  Sets no job can use get cost 1."""
    L = inst.loads()
    costs = []
    for i in range(inst.m):
        vals = [v for v in L[:, i, 0] if math.isfinite(v)]
        costs.append(vals[0] if vals and vals[0] > 0 else 1.0)
    elements = [tuple(i for i in range(inst.m) if math.isfinite(L[j, i, 0])) for j in range(inst.n)]
    return SetCoverInstance(tuple(costs), tuple(elements))


# ---------------------------------------------------------------- streaming


def stream(inst: Instance) -> Iterator[tuple[int, np.ndarray]]:
    for j, job in enumerate(inst.jobs):
        yield j, job


class OnlineSession:
    """Feeds jobs one at a time and demands a decision before the next job."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.assignment = Assignment(inst.m)
        self._next = 0
        self._pending: Optional[int] = None

    def __iter__(self):
        return self

    def __next__(self) -> tuple[int, np.ndarray]:
        if self._pending is not None:
            raise PlacementError(f"no decision recorded for job {self._pending}")
        if self._next >= self.inst.n:
            raise StopIteration
        j = self._next
        self._next += 1
        self._pending = j
        return j, self.inst.jobs[j]

    def decide(self, j: int, placement: Optional[tuple[int, int]]) -> None:
        if self._pending != j:
            raise PlacementError(f"job {j} is not awaiting a decision")
        if placement is not None:
            self.assignment.place(j, *placement)
        self._pending = None


# --------------------------------------------------------------------- JSON


def _enc(v: float):
    return "inf" if math.isinf(v) else float(v)


def _dec(v) -> float:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "+inf", "infinity"):
            return INF
        raise ValueError(f"bad load value {v!r}")
    return float(v)


def instance_to_json(inst: Instance) -> dict:
    d = {"m": inst.m, "r": inst.r,
         "inner_norms": [norm_to_json(nm) for nm in inst.inner_norms],
         "aggregate": aggregate_to_json(inst.aggregate),
         "budget": inst.budget,
         "jobs": [[_enc(v) for v in job.reshape(-1)] for job in inst.jobs]}
    if isinstance(inst, BudgetedInstance):
        d["machine_budgets"] = list(inst.machine_budgets)
    return d


def instance_from_json(d: dict) -> Instance:
    m, r = int(d["m"]), int(d["r"])
    jobs = tuple(np.array([_dec(v) for v in job]).reshape(m, r) for job in d.get("jobs", []))
    kw = dict(m=m, r=r, inner_norms=tuple(norm_from_json(x) for x in d["inner_norms"]),
              aggregate=aggregate_from_json(d["aggregate"]), budget=float(d.get("budget", 0.0)),
              jobs=jobs)
    if "machine_budgets" in d:
        return BudgetedInstance(machine_budgets=tuple(d["machine_budgets"]), **kw)
    return Instance(**kw)


def setcover_to_json(sc: SetCoverInstance) -> dict:
    return {"costs": list(sc.costs), "elements": [list(e) for e in sc.elements]}


def setcover_from_json(d: dict) -> SetCoverInstance:
    return SetCoverInstance(tuple(d["costs"]), tuple(tuple(e) for e in d["elements"]))


def load_any(path: str):
    with open(path) as fh:
        d = json.load(fh)
    if "costs" in d and "elements" in d:
        return setcover_from_json(d)
    return instance_from_json(d)
