"""Monotone norms, aggregate functions and their discrete marginals.

All evaluators accept nonnegative vectors that may contain ``inf``; products
``0 * inf`` are defined as 0 so that an unused infinite option contributes
nothing.  The ``*_rows`` variants evaluate every row of a 2-d array at once
and are what the exact oracles use to tabulate loads of job subsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

INF = math.inf
REL_TOL = 1e-12


class DimensionError(ValueError):
    pass


def leq(a: float, b: float, tol: float = REL_TOL) -> bool:
    """``a <= b`` up to a relative tolerance (exact for infinities)."""
    if a <= b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return a - b <= tol * max(1.0, abs(b))


def geq(a: float, b: float, tol: float = REL_TOL) -> bool:
    return leq(b, a, tol)


def log2m(m: int) -> float:
    """Base-2 log of a machine count, clamped below at 1."""
    return max(1.0, math.log2(m)) if m > 0 else 1.0


def _safe_mul(w, x):
    with np.errstate(invalid="ignore"):
        out = np.multiply(w, x)
    return np.where(np.asarray(w) == 0, 0.0, out)


def _as_tuple(v) -> tuple:
    return tuple(float(a) for a in v)


# ---------------------------------------------------------------- norm specs


@dataclass(frozen=True)
class LInf:
    kind = "LInf"
    dim = None


@dataclass(frozen=True)
class Lp:
    p: float
    kind = "Lp"
    dim = None

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("Lp needs p >= 1")


@dataclass(frozen=True)
class TopK:
    k: int
    kind = "TopK"
    dim = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("TopK needs a positive integer k")


@dataclass(frozen=True)
class WeightedL1:
    weights: tuple

    kind = "WeightedL1"

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_tuple(self.weights))
        if any(w < 0 or math.isnan(w) for w in self.weights):
            raise ValueError("weights must be nonnegative")

    @property
    def dim(self):
        return len(self.weights)


@dataclass(frozen=True)
class OrderedSym:
    """Ordered weighted l1: sum_t w[t] * (t-th largest coordinate).

    Coordinates beyond ``len(w)`` get weight 0, which keeps the weights
    nonincreasing, so the norm is defined for every dimension.
    """

    w: tuple
    kind = "OrderedSym"
    dim = None

    def __post_init__(self):
        object.__setattr__(self, "w", _as_tuple(self.w))
        if not self.w or not self.w[0] > 0:
            raise ValueError("OrderedSym needs w[0] > 0")
        if any(a < 0 for a in self.w):
            raise ValueError("OrderedSym weights must be nonnegative")
        if any(self.w[t + 1] > self.w[t] for t in range(len(self.w) - 1)):
            raise ValueError("OrderedSym weights must be nonincreasing")


@dataclass(frozen=True)
class ActAssign:
    """Opening cost plus assignment cost: scale * max(x) + sum_c weights[c] * x[c]."""

    scale: float
    weights: tuple
    kind = "ActAssign"

    def __post_init__(self):
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "weights", _as_tuple(self.weights))
        if self.scale < 0 or any(w < 0 for w in self.weights):
            raise ValueError("ActAssign parameters must be nonnegative")

    @property
    def dim(self):
        return len(self.weights)


@dataclass(frozen=True)
class Nested:
    """Outer norm applied to the vector of block norms.

    ``blocks`` is a tuple of ``(indices, inner_norm)``; the blocks must
    partition ``range(dim)``.
    """

    outer: "NormSpec"
    blocks: tuple
    kind = "Nested"

    def __post_init__(self):
        blocks = tuple((tuple(int(c) for c in idx), spec) for idx, spec in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        seen: set[int] = set()
        for idx, spec in blocks:
            if not idx:
                raise ValueError("empty block")
            if seen.intersection(idx) or len(set(idx)) != len(idx):
                raise ValueError("Nested blocks must be pairwise disjoint")
            seen.update(idx)
            if spec.dim is not None and spec.dim != len(idx):
                raise DimensionError("inner norm dimension differs from its block size")
        if seen != set(range(len(seen))):
            raise ValueError("Nested blocks must cover every coordinate")
        if self.outer.dim is not None and self.outer.dim != len(blocks):
            raise DimensionError("outer norm dimension differs from the block count")

    @property
    def dim(self):
        return sum(len(idx) for idx, _ in self.blocks)


NormSpec = Union[LInf, Lp, TopK, WeightedL1, OrderedSym, ActAssign, Nested]


def _check_dim(spec, d: int) -> None:
    if spec.dim is not None and spec.dim != d:
        raise DimensionError(f"{spec.kind} expects dimension {spec.dim}, got {d}")


def eval_norm_rows(spec: NormSpec, X) -> np.ndarray:
    """Evaluate ``spec`` on each row of ``X`` (shape ``(rows, dim)``)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("expected a 2-d array")
    rows, d = X.shape
    _check_dim(spec, d)
    if d == 0:
        return np.zeros(rows)
    if isinstance(spec, LInf):
        return X.max(axis=1)
    if isinstance(spec, Lp):
        top = X.max(axis=1)
        out = np.array(top)
        fin = np.isfinite(top) & (top > 0)
        if fin.any():
            Z = X[fin] / top[fin, None]
            out[fin] = top[fin] * np.power(np.power(Z, spec.p).sum(axis=1), 1.0 / spec.p)
        return out
    if isinstance(spec, TopK):
        S = -np.sort(-X, axis=1)
        return S[:, : spec.k].sum(axis=1)
    if isinstance(spec, OrderedSym):
        S = -np.sort(-X, axis=1)
        t = min(d, len(spec.w))
        return _safe_mul(np.asarray(spec.w[:t]), S[:, :t]).sum(axis=1)
    if isinstance(spec, WeightedL1):
        return _safe_mul(np.asarray(spec.weights), X).sum(axis=1)
    if isinstance(spec, ActAssign):
        return (_safe_mul(spec.scale, X.max(axis=1))
                + _safe_mul(np.asarray(spec.weights), X).sum(axis=1))
    if isinstance(spec, Nested):
        inner = np.stack(
            [eval_norm_rows(s, X[:, list(idx)]) for idx, s in spec.blocks], axis=1)
        return eval_norm_rows(spec.outer, inner)
    raise TypeError(f"unknown norm spec {spec!r}")


def eval_norm(spec: NormSpec, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(eval_norm_rows(spec, x)[0])


def is_symmetric(spec: NormSpec) -> bool:
    if isinstance(spec, (LInf, Lp, TopK, OrderedSym)):
        return True
    if isinstance(spec, WeightedL1):
        return len(set(spec.weights)) <= 1
    return False


def unit_prefix_norm(spec: NormSpec, k: int) -> float:
    """Norm of the vector with ``k`` ones (symmetric specs only)."""
    if k <= 0:
        return 0.0
    if isinstance(spec, LInf):
        return 1.0
    if isinstance(spec, Lp):
        return float(k) ** (1.0 / spec.p)
    if isinstance(spec, TopK):
        return float(min(k, spec.k))
    if isinstance(spec, OrderedSym):
        return float(sum(spec.w[:k]))
    if isinstance(spec, WeightedL1) and is_symmetric(spec):
        w = spec.weights[0] if spec.weights else 0.0
        return float(min(k, len(spec.weights)) * w)
    raise ValueError(f"{spec.kind} is not symmetric")


def symmetric_eval(spec: NormSpec, values: Sequence[float]) -> float:
    """Evaluate a symmetric spec on a multiset of coordinate values.

    Zero coordinates never matter for symmetric norms, so the dimension of the
    ambient vector is irrelevant (except for uniform WeightedL1, whose weight
    is the same everywhere).
    """
    v = np.asarray(values, dtype=float).reshape(1, -1)
    if isinstance(spec, WeightedL1):
        w = spec.weights[0] if spec.weights else 0.0
        return float(_safe_mul(w, v).sum())
    return float(eval_norm_rows(spec, v)[0])


# ---------------------------------------------------------- aggregate specs


@dataclass(frozen=True)
class NormAgg:
    norm: NormSpec
    kind = "NormAgg"
    p = 1.0

    @property
    def dim(self):
        return self.norm.dim


@dataclass(frozen=True)
class SumPowers:
    p: float
    weights: tuple
    kind = "SumPowers"

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_tuple(self.weights))
        if not self.p >= 1:
            raise ValueError("SumPowers needs p >= 1")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")

    @property
    def dim(self):
        return len(self.weights)


@dataclass(frozen=True)
class PNormPower:
    p: float
    kind = "PNormPower"
    dim = None

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("PNormPower needs p >= 1")


@dataclass(frozen=True)
class GroupSum:
    """``base`` applied to per-group sums; used for machine copies."""

    base: "AggregateSpec"
    groups: tuple
    kind = "GroupSum"

    def __post_init__(self):
        groups = tuple(tuple(int(c) for c in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        flat = [c for g in groups for c in g]
        if sorted(flat) != list(range(len(flat))):
            raise ValueError("groups must partition the coordinates")
        if self.base.dim is not None and self.base.dim != len(groups):
            raise DimensionError("base aggregate dimension differs from the group count")

    @property
    def p(self):
        return self.base.p

    @property
    def dim(self):
        return sum(len(g) for g in self.groups)

    def owner(self, c: int) -> int:
        for gi, g in enumerate(self.groups):
            if c in g:
                return gi
        raise IndexError(c)


AggregateSpec = Union[NormAgg, SumPowers, PNormPower, GroupSum]


def agg_p(spec: AggregateSpec) -> float:
    return float(spec.p)


def eval_aggregate_rows(spec: AggregateSpec, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise DimensionError("expected a 2-d array")
    _check_dim(spec, Y.shape[1])
    if isinstance(spec, NormAgg):
        return eval_norm_rows(spec.norm, Y)
    if isinstance(spec, SumPowers):
        return _safe_mul(np.asarray(spec.weights), np.power(Y, spec.p)).sum(axis=1)
    if isinstance(spec, PNormPower):
        return np.power(Y, spec.p).sum(axis=1)
    if isinstance(spec, GroupSum):
        Z = np.stack([Y[:, list(g)].sum(axis=1) for g in spec.groups], axis=1)
        return eval_aggregate_rows(spec.base, Z)
    raise TypeError(f"unknown aggregate spec {spec!r}")


def eval_aggregate(spec: AggregateSpec, y: Sequence[float]) -> float:
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return float(eval_aggregate_rows(spec, y)[0])


def activation_cost(spec: AggregateSpec, y, b) -> float:
    """f(b * y) with the 0 * inf = 0 convention."""
    return eval_aggregate(spec, _safe_mul(np.asarray(y, dtype=float), np.asarray(b, dtype=float)))


def marginal(spec: AggregateSpec, y, i: int, b) -> float:
    """f(b*(y + e_i)) - f(b*y) for an inactive coordinate i."""
    y = np.asarray(y, dtype=float)
    if y[i] != 0:
        raise ValueError(f"coordinate {i} is already active")
    y1 = y.copy()
    y1[i] = 1.0
    hi = activation_cost(spec, y1, b)
    lo = activation_cost(spec, y, b)
    if math.isinf(hi):
        return INF
    return max(0.0, hi - lo)


def homogeneity_degree(spec: AggregateSpec) -> float:
    if isinstance(spec, NormAgg):
        return 1.0
    if isinstance(spec, (SumPowers, PNormPower)):
        return float(spec.p)
    if isinstance(spec, GroupSum):
        return homogeneity_degree(spec.base)
    raise TypeError(f"unknown aggregate spec {spec!r}")


def unit_cap(spec: AggregateSpec, i: int, B: float, m: int) -> float:
    """sup{b >= 0 : f(b e_i) <= B}; ``inf`` when f ignores coordinate i."""
    if B < 0:
        raise ValueError("budget must be nonnegative")
    e = np.zeros(m)
    e[i] = 1.0
    fe = eval_aggregate(spec, e)
    if fe == 0:
        return INF
    d = homogeneity_degree(spec)
    return (B / fe) ** (1.0 / d)


# --------------------------------------------------------------------- JSON


def norm_to_json(spec: NormSpec) -> dict:
    if isinstance(spec, LInf):
        return {"kind": "LInf"}
    if isinstance(spec, Lp):
        return {"kind": "Lp", "p": spec.p}
    if isinstance(spec, TopK):
        return {"kind": "TopK", "k": spec.k}
    if isinstance(spec, WeightedL1):
        return {"kind": "WeightedL1", "weights": list(spec.weights)}
    if isinstance(spec, OrderedSym):
        return {"kind": "OrderedSym", "w": list(spec.w)}
    if isinstance(spec, ActAssign):
        return {"kind": "ActAssign", "scale": spec.scale, "weights": list(spec.weights)}
    if isinstance(spec, Nested):
        return {"kind": "Nested", "outer": norm_to_json(spec.outer),
                "blocks": [{"indices": list(idx), "norm": norm_to_json(s)}
                           for idx, s in spec.blocks]}
    raise TypeError(f"unknown norm spec {spec!r}")


def norm_from_json(d: dict) -> NormSpec:
    kind = d.get("kind")
    if kind == "LInf":
        return LInf()
    if kind == "Lp":
        return Lp(float(d["p"]))
    if kind == "TopK":
        return TopK(int(d["k"]))
    if kind == "WeightedL1":
        return WeightedL1(d["weights"])
    if kind == "OrderedSym":
        return OrderedSym(d["w"])
    if kind == "ActAssign":
        return ActAssign(d["scale"], d["weights"])
    if kind == "Nested":
        return Nested(norm_from_json(d["outer"]),
                      tuple((b["indices"], norm_from_json(b["norm"])) for b in d["blocks"]))
    raise ValueError(f"unknown norm kind {kind!r}")


def aggregate_to_json(spec: AggregateSpec) -> dict:
    if isinstance(spec, NormAgg):
        return {"kind": "NormAgg", "norm": norm_to_json(spec.norm)}
    if isinstance(spec, SumPowers):
        return {"kind": "SumPowers", "p": spec.p, "weights": list(spec.weights)}
    if isinstance(spec, PNormPower):
        return {"kind": "PNormPower", "p": spec.p}
    if isinstance(spec, GroupSum):
        return {"kind": "GroupSum", "base": aggregate_to_json(spec.base),
                "groups": [list(g) for g in spec.groups]}
    raise TypeError(f"unknown aggregate spec {spec!r}")


def aggregate_from_json(d: dict) -> AggregateSpec:
    kind = d.get("kind")
    if kind == "NormAgg":
        return NormAgg(norm_from_json(d["norm"]))
    if kind == "SumPowers":
        return SumPowers(float(d["p"]), d["weights"])
    if kind == "PNormPower":
        return PNormPower(float(d["p"]))
    if kind == "GroupSum":
        return GroupSum(aggregate_from_json(d["base"]), d["groups"])
    raise ValueError(f"unknown aggregate kind {kind!r}")


def separable_terms(spec: AggregateSpec, m: int) -> Optional[tuple[str, list]]:
    """Describe f as a combination of per-coordinate terms, if possible.

    Returns ``("sum", g)`` when f(y) = sum_i g_i(y_i), ``("max", g)`` when
    f(y) = max_i g_i(y_i), and None otherwise.  ``g`` is a list of callables
    mapping an array of values to an array of term values.  For Lp the sum
    form describes f(y)**p; callers compare against the budget raised to the
    returned power (see ``separable_power``).
    """
    if isinstance(spec, SumPowers):
        return "sum", [(lambda v, w=w, p=spec.p: _safe_mul(w, np.power(v, p))) for w in spec.weights]
    if isinstance(spec, PNormPower):
        return "sum", [(lambda v, p=spec.p: np.power(v, p)) for _ in range(m)]
    if isinstance(spec, NormAgg):
        n = spec.norm
        if isinstance(n, WeightedL1):
            return "sum", [(lambda v, w=w: _safe_mul(w, v)) for w in n.weights]
        if isinstance(n, Lp):
            return "sum", [(lambda v, p=n.p: np.power(v, p)) for _ in range(m)]
        if isinstance(n, LInf) or (isinstance(n, TopK) and n.k == 1):
            return "max", [(lambda v: np.asarray(v, dtype=float)) for _ in range(m)]
        if isinstance(n, OrderedSym) and len(n.w) == 1:
            return "max", [(lambda v, w=n.w[0]: w * np.asarray(v, dtype=float)) for _ in range(m)]
        if isinstance(n, TopK) and n.k >= m:
            return "sum", [(lambda v: np.asarray(v, dtype=float)) for _ in range(m)]
    return None


def separable_power(spec: AggregateSpec) -> float:
    """Exponent relating ``separable_terms`` to f: the terms combine to f**power."""
    if isinstance(spec, NormAgg) and isinstance(spec.norm, Lp):
        return spec.norm.p
    return 1.0
