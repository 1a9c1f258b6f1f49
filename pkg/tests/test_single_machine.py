import math

import numpy as np
import pytest
from conftest import bf_norm_pack

from ogsched.norms import ActAssign, LInf, Lp, OrderedSym, TopK, WeightedL1, eval_norm
from ogsched.single_machine import (ActivationSolver, LInfSolver, NormMachine, SymmetricSolver, make_inner_solver,
                                    solver_factor)


def test_linf_examples():
    s = LInfSolver(5)
    assert s.offer(0, [7, 3]) == 1
    assert s.offer(1, [7, 9]) is None
    assert LInfSolver(0).offer(0, [0]) == 0


def test_symmetric_l1_example():
    s = SymmetricSolver(Lp(1), 10, 4)
    assert s.pstar == 5
    assert [s.offer(j, [p]) for j, p in enumerate((3, 4, 6))] == [0, 0, None]


def test_symmetric_small_guess_takes_one_job():
    s = SymmetricSolver(Lp(1), 10, 2)
    assert s.offer(0, [1]) == 0
    assert s.offer(1, [1]) is None


def test_symmetric_top2_trace():
    # the third job keeps the Top-2 value at 6 <= B, so it is accepted too
    s = SymmetricSolver(TopK(2), 6, 4)
    assert s.pstar == 3
    assert [s.offer(j, [3]) for j in range(3)] == [0, 0, 0]
    assert s.load == 6


def test_symmetric_fractional_guess_rounds_up():
    s = SymmetricSolver(Lp(1), 10, 3.2)
    assert s.guess == 4 and s.pstar == 5


def test_activation_examples():
    nm = ActAssign(1.0, (1.0, 2.0))
    assert ActivationSolver(nm, 10, 4).offer(0, [5], [1.0]) == 0
    assert ActivationSolver(nm, 10, 4).offer(0, [5], [2.0]) is None
    s = ActivationSolver(nm, 10, 2)
    assert s.offer(0, [1], [1.0]) == 0
    assert s.offer(1, [1], [1.0]) is None


def test_activation_reads_weights_from_norm():
    nm = ActAssign(1.0, (1.0, 2.0, 1.0, 2.0))
    s = ActivationSolver(nm, 10, 4, r=2)
    # job 0, way 1 sits at coordinate 1 with weight 2: 5*2 > 2B/M = 5
    assert s.offer(0, [math.inf, 5]) is None
    assert s.offer(1, [5, math.inf]) == 0


def test_bad_guess_rejected():
    with pytest.raises(ValueError):
        SymmetricSolver(Lp(2), 1, 0)
    with pytest.raises(ValueError):
        ActivationSolver(ActAssign(1, (1,)), 1, -1)


def test_dispatch_and_factors():
    assert isinstance(make_inner_solver(LInf(), 1, 1), LInfSolver)
    assert isinstance(make_inner_solver(OrderedSym((2, 1)), 1, 3), SymmetricSolver)
    assert isinstance(make_inner_solver(ActAssign(1, (1,)), 1, 3), ActivationSolver)
    assert [solver_factor(n) for n in (LInf(), Lp(2), ActAssign(1, (1,)))] == [1, 1, 2]
    with pytest.raises(ValueError):
        make_inner_solver(WeightedL1((1, 2)), 1, 1)


def test_linf_matches_oracle_count():
    g = np.random.default_rng(1)
    for _ in range(300):
        n, r = int(g.integers(1, 8)), int(g.integers(1, 3))
        jobs = g.uniform(0, 4, size=(n, r))
        B = float(g.uniform(0, 4))
        s = LInfSolver(B)
        acc = sum(s.offer(j, jobs[j]) is not None for j in range(n))
        assert acc == bf_norm_pack(LInf(), list(jobs), B)
        assert s.load <= B


def test_symmetric_guarantee_small_sample():
    g = np.random.default_rng(2)
    for _ in range(300):
        n = int(g.integers(1, 8))
        nm = [Lp(1), Lp(2), TopK(2), OrderedSym((2, 1, 0.5))][int(g.integers(4))]
        jobs = g.uniform(0.1, 3, size=(n, 1))
        B = float(g.uniform(1, 6))
        opt = bf_norm_pack(nm, list(jobs), B)
        if opt == 0:
            continue
        M = float(g.uniform(0.5, opt))
        s = SymmetricSolver(nm, B, M)
        acc = [(j, s.offer(j, jobs[j])) for j in range(n)]
        kept = [jobs[j][k] for j, k in acc if k is not None]
        assert len(kept) >= math.ceil(M) / 3
        assert eval_norm(nm, kept) <= B * (1 + 1e-9)


def test_norm_machine_pack_opt():
    m = NormMachine(Lp(1), 1)
    assert m.pack_opt([(0, np.array([1.0])), (3, np.array([2.0])), (5, np.array([3.0]))], 4) == 2
    assert m.pack_opt([], 4) == 0


def test_budget_ties_survive_rounding():
    # a cap computed as sqrt(B / w) can land one ulp below the load it came from
    B = 1.5 * 1.7170951897412021 ** 2
    cap = math.sqrt(B / 1.5)
    x = 1.7170951897412021
    assert LInfSolver(cap).offer(0, [x]) == 0
    assert bf_norm_pack(LInf(), [[x]], cap) == 1
