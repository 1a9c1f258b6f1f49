"""Online single-machine packing solvers.

Each solver sees jobs one at a time as per-way load vectors and either picks
a way (returning its index) or rejects.  Guarantees, for a guess M at most the
offline optimum:

* ``LInfSolver``: accepts everything the optimum could, load <= B;
* ``SymmetricSolver``: accepts >= ceil(M)/3 jobs, load <= B;
* ``ActivationSolver``: accepts >= ceil(M)/3 jobs, load <= 2B.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .norms import ActAssign, LInf, NormSpec, is_symmetric, leq, symmetric_eval, unit_prefix_norm
from .oracle import opt_norm_pack


class InnerSolver:
    c: float = 1.0

    def __init__(self, budget: float):
        self.budget = float(budget)
        self.accepted: list[tuple[int, int]] = []
        self.load = 0.0

    def offer(self, j: int, way_loads) -> Optional[int]:
        raise NotImplementedError


class LInfSolver(InnerSolver):
    c = 1.0

    def offer(self, j, way_loads):
        for k, p in enumerate(way_loads):
            if leq(p, self.budget):
                self.accepted.append((j, k))
                self.load = max(self.load, float(p))
                return k
        return None


def _ceil_guess(M: float) -> int:
    if not M > 0:
        raise ValueError("guess M must be positive")
    return math.ceil(M - 1e-12)


class SymmetricSolver(InnerSolver):
    c = 1.0

    def __init__(self, norm: NormSpec, budget: float, guess: float):
        super().__init__(budget)
        if not is_symmetric(norm):
            raise ValueError(f"{norm.kind} is not symmetric")
        self.norm = norm
        self.guess = _ceil_guess(guess)
        self.single = self.guess <= 2
        self.pstar = math.inf if self.single else self.budget / unit_prefix_norm(norm, self.guess // 2)
        self._vals: list[float] = []

    def offer(self, j, way_loads):
        if self.single and self.accepted:
            return None
        for k, p in enumerate(way_loads):
            p = float(p)
            if not math.isfinite(p) or not leq(p, self.pstar):
                continue
            val = symmetric_eval(self.norm, self._vals + [p])
            if leq(val, self.budget):
                self._vals.append(p)
                self.load = val
                self.accepted.append((j, k))
                return k
        return None


class ActivationSolver(InnerSolver):
    """Solver for scale * max(x) + sum_c w_c x_c.

    Weights of a job's ways may be supplied with the offer; otherwise they
    are read from the norm at the job's coordinates.
    """

    c = 2.0

    def __init__(self, norm: ActAssign, budget: float, guess: float, r: int = 1):
        super().__init__(budget)
        self.norm = norm
        self.r = r
        self.guess = _ceil_guess(guess)
        self.single = self.guess <= 2
        self._max = 0.0
        self._sum = 0.0

    def offer(self, j, way_loads, way_weights: Optional[Sequence[float]] = None):
        if self.single and self.accepted:
            return None
        if way_weights is None:
            way_weights = [self.norm.weights[j * self.r + k] for k in range(len(way_loads))]
        s, B, M = self.norm.scale, self.budget, self.guess
        for k, p in enumerate(way_loads):
            p = float(p)
            if not math.isfinite(p):
                continue
            wp = way_weights[k] * p
            new = s * max(self._max, p) + self._sum + wp
            if self.single:
                ok = leq(s * p + wp, B)
            else:
                ok = leq(s * p, B) and leq(wp, 2 * B / M) and leq(new, 2 * B)
            if ok:
                self._max = max(self._max, p)
                self._sum += wp
                self.load = new
                self.accepted.append((j, k))
                return k
        return None


def solver_factor(norm: NormSpec) -> float:
    """Budget violation factor c of the solver used for ``norm``."""
    if isinstance(norm, LInf) or is_symmetric(norm):
        return 1.0
    if isinstance(norm, ActAssign):
        return 2.0
    raise ValueError(f"no single-machine solver for {norm.kind}")


def make_inner_solver(norm: NormSpec, budget: float, guess: float, r: int = 1) -> InnerSolver:
    if isinstance(norm, LInf):
        return LInfSolver(budget)
    if is_symmetric(norm):
        return SymmetricSolver(norm, budget, guess)
    if isinstance(norm, ActAssign):
        return ActivationSolver(norm, budget, guess, r)
    raise ValueError(f"no single-machine solver for {norm.kind}")


class NormMachine:
    """A plain machine as seen by the budgeted engines."""

    def __init__(self, norm: NormSpec, r: int):
        self.norm = norm
        self.r = r
        self.c = solver_factor(norm)

    def pack_opt(self, offered: Sequence[tuple[int, np.ndarray]], budget: float) -> int:
        if not offered:
            return 0
        ids = [j for j, _ in offered]
        loads = [ld for _, ld in offered]
        return opt_norm_pack(self.norm, loads, budget, job_ids=ids)[0]

    def new_solver(self, budget: float, guess: float, rng=None) -> InnerSolver:
        return make_inner_solver(self.norm, budget, guess, self.r)
