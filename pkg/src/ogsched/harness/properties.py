"""Randomized property suites for norms and aggregates.

Each property is evaluated on batches of random nonnegative vectors (with a
share of exact zeros, so sparse vectors are exercised) and reports the number
of violations at relative tolerance ``TOL``.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..norms import (ActAssign, GroupSum, LInf, Lp, Nested, NormAgg, OrderedSym, PNormPower, SumPowers, TopK,
                     WeightedL1, eval_aggregate_rows, eval_norm_rows, homogeneity_degree, is_symmetric)
from ..rng import RandomSource

TOL = 1e-9
DIM = 6


def suite_norms() -> list:
    return [LInf(), Lp(1.0), Lp(2.0), Lp(3.0), Lp(1.5), TopK(1), TopK(2), TopK(3),
            OrderedSym((1.0, 0.6, 0.3)), WeightedL1((0.5, 1.0, 2.0, 0.0, 1.5, 0.25)),
            ActAssign(2.0, (0.5, 1.0, 0.2, 0.0, 1.0, 3.0)),
            Nested(Lp(2.0), (((0, 1, 2), LInf()), ((3, 4, 5), Lp(1.0)))),
            Nested(TopK(1), (((0, 1), Lp(2.0)), ((2, 3, 4, 5), TopK(2))))]


def suite_aggregates() -> list:
    return [SumPowers(1.0, (1.0,) * DIM), SumPowers(2.0, (0.5, 1.0, 2.0, 1.0, 0.3, 1.0)),
            SumPowers(3.0, (1.0,) * DIM), PNormPower(2.0), PNormPower(1.5),
            GroupSum(PNormPower(2.0), ((0, 1, 2), (3, 4, 5))),
            GroupSum(SumPowers(3.0, (1.0, 2.0)), ((0, 2, 4), (1, 3, 5))),
            NormAgg(Lp(2.0)), NormAgg(TopK(2))]


def _vectors(gen: np.random.Generator, rows: int) -> np.ndarray:
    X = gen.exponential(1.0, size=(rows, DIM))
    X[gen.random((rows, DIM)) < 0.3] = 0.0
    return X


def _bad(lhs, rhs) -> int:
    return int(np.sum(lhs > rhs + TOL * np.maximum(1.0, np.abs(rhs))))


def _norm_props(spec, gen, cases) -> Iterator[tuple[str, int]]:
    f = lambda X: eval_norm_rows(spec, X)
    X, Y = _vectors(gen, cases), _vectors(gen, cases)
    lam = gen.uniform(0.0, 5.0, size=cases)
    fx, fy = f(X), f(Y)
    yield "triangle", _bad(f(X + Y), fx + fy)
    fl = f(lam[:, None] * X)
    yield "homogeneity", int(np.sum(np.abs(fl - lam * fx) > TOL * np.maximum(1.0, lam * fx)))
    yield "monotonicity", _bad(fx, f(np.maximum(X, Y)))
    if is_symmetric(spec):
        P = np.argsort(gen.random((cases, DIM)), axis=1)
        yield "symmetry", int(np.sum(np.abs(f(np.take_along_axis(X, P, axis=1)) - fx)
                                     > TOL * np.maximum(1.0, fx)))


def _aggregate_props(spec, gen, cases) -> Iterator[tuple[str, int]]:
    f = lambda Y: eval_aggregate_rows(spec, Y)
    p = homogeneity_degree(spec)
    X, Y = _vectors(gen, cases), _vectors(gen, cases)
    lam = gen.uniform(0.0, 5.0, size=cases)
    fx, fy = f(X), f(Y)
    yield "p-subadditivity", _bad(f(X + Y) ** (1 / p), fx ** (1 / p) + fy ** (1 / p))
    fl = f(lam[:, None] * X)
    yield "homogeneity", int(np.sum(np.abs(fl - lam ** p * fx) > TOL * np.maximum(1.0, lam ** p * fx)))
    yield "monotonicity", _bad(fx, f(np.maximum(X, Y)))
    if not isinstance(spec, NormAgg):
        # marginals of a p-bounded aggregate grow with the activation profile
        b = gen.uniform(0.1, 4.0, size=(cases, DIM))
        y_lo = (gen.random((cases, DIM)) < 0.4).astype(float)
        y_hi = np.maximum(y_lo, (gen.random((cases, DIM)) < 0.4).astype(float))
        i = gen.integers(0, DIM, size=cases)
        rows = np.arange(cases)
        y_lo[rows, i] = 0.0
        y_hi[rows, i] = 0.0
        e = np.zeros((cases, DIM))
        e[rows, i] = 1.0

        def marg(y):
            return f(b * (y + e)) - f(b * y)
        yield "marginal monotonicity", _bad(marg(y_lo), marg(y_hi))


def run_property_suite(seed: int, cases: int) -> Iterator[tuple[str, int, int]]:
    """Yield ``(label, cases, violations)`` for every norm, aggregate and property."""
    src = RandomSource(seed).child("properties")
    for t, spec in enumerate(suite_norms()):
        for name, bad in _norm_props(spec, src.stream("norm", t), cases):
            yield f"{spec!r} {name}", cases, bad
    for t, spec in enumerate(suite_aggregates()):
        for name, bad in _aggregate_props(spec, src.stream("aggregate", t), cases):
            yield f"{spec!r} {name}", cases, bad
