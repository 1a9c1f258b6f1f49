"""Seeded instance generators for the desk-scale scenarios."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..instance import BudgetedInstance, Instance, SetCoverInstance
from ..norms import ActAssign, LInf, Lp, Nested, NormAgg, PNormPower, SumPowers, WeightedL1, activation_cost


def generate_set_cover(n: int, m: int, density: float, cost_range: tuple[float, float],
                       rng: np.random.Generator) -> SetCoverInstance:
    """Each set contains each element with probability ``density``; uncovered
    elements join one uniformly chosen set."""
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    lo, hi = cost_range
    costs = rng.uniform(lo, hi, size=m) if hi > lo else np.full(m, float(lo))
    member = rng.random((n, m)) < density
    fallback = rng.integers(0, m, size=n)
    elements = []
    for j in range(n):
        sets = [i for i in range(m) if member[j, i]]
        elements.append(tuple(sets) if sets else (int(fallback[j]),))
    return SetCoverInstance(tuple(float(c) for c in costs), tuple(elements))


def generate_load_balancing(n: int, m: int, load_range: tuple[float, float], inner_norm, aggregate,
                            rng: np.random.Generator, r: int = 1) -> Instance:
    """Unrelated-machine loads drawn uniformly from ``load_range``."""
    lo, hi = load_range
    loads = rng.uniform(lo, hi, size=(n, m, r)) if hi > lo else np.full((n, m, r), float(lo))
    inner = inner_norm if isinstance(inner_norm, (list, tuple)) else (inner_norm,) * m
    return Instance(m=m, r=r, inner_norms=tuple(inner), aggregate=aggregate, budget=0.0,
                    jobs=tuple(loads))


def nested_aggregate(m: int, L: int, outer=None, block=None) -> NormAgg:
    """Split machines into L contiguous blocks (l_inf inside, l_2 across by default)."""
    if not 1 <= L <= m:
        raise ValueError("need 1 <= L <= m")
    bounds = np.linspace(0, m, L + 1).round().astype(int)
    blocks = tuple((tuple(range(bounds[t], bounds[t + 1])), block or LInf()) for t in range(L))
    return NormAgg(Nested(outer or Lp(2.0), blocks))


def generate_nested(n: int, m: int, L: int, load_range: tuple[float, float], rng: np.random.Generator,
                    inner_norm=None, r: int = 1) -> Instance:
    return generate_load_balancing(n, m, load_range, inner_norm or LInf(), nested_aggregate(m, L), rng, r)


def generate_facility_location(n: int, m: int, opening_range: tuple[float, float],
                               distance_range: tuple[float, float], rng: np.random.Generator,
                               opening: Optional[Sequence[float]] = None,
                               distances: Optional[np.ndarray] = None) -> Instance:
    """Facilities as machines with norm c_i max(x) + sum_j d_ij x_j; unit loads; l1 aggregate."""
    if opening is None:
        lo, hi = opening_range
        opening = rng.uniform(lo, hi, size=m) if hi > lo else np.full(m, float(lo))
    if distances is None:
        lo, hi = distance_range
        distances = rng.uniform(lo, hi, size=(m, n)) if hi > lo else np.full((m, n), float(lo))
    inner = tuple(ActAssign(float(opening[i]), tuple(float(d) for d in distances[i])) for i in range(m))
    return Instance(m=m, r=1, inner_norms=inner, aggregate=NormAgg(WeightedL1((1.0,) * m)), budget=0.0,
                    jobs=tuple(np.ones((m, 1)) for _ in range(n)))


def generate_budgeted(n: int, m: int, p: float, gen: np.random.Generator, pnorm: bool = False
                      ) -> BudgetedInstance:
    """Random Budgeted-Sched-Pack instance; B is the cost of activating a random half."""
    inner = tuple(LInf() if i % 2 == 0 else Lp(1.0) for i in range(m))
    agg = PNormPower(p) if pnorm else SumPowers(p, tuple(gen.uniform(0.5, 1.5, size=m)))
    b = tuple(gen.uniform(1.0, 4.0, size=m))
    half = gen.permutation(m)[: max(1, m // 2)]
    y = [1 if i in half else 0 for i in range(m)]
    B = activation_cost(agg, y, b)
    jobs = tuple(gen.uniform(0.3, 2.0, size=(m, 1)) for _ in range(n))
    return BudgetedInstance(m=m, r=1, inner_norms=inner, aggregate=agg, budget=B, jobs=jobs,
                            machine_budgets=b)
