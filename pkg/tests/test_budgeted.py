import itertools
import math

import numpy as np
import pytest
from conftest import bf_norm_pack

from ogsched.budgeted import (OBCMEngine, WeightedL1Rule, budget_wrapper, default_K, run_budgeted_pbounded,
                              run_budgeted_wl1, run_obcm, sample_threshold_multiplier, threshold_support)
from ogsched.harness.generators import generate_budgeted, generate_set_cover
from ogsched.instance import BudgetedInstance, SetCoverInstance
from ogsched.norms import LInf, Lp, NormAgg, SumPowers, WeightedL1, activation_cost
from ogsched.rng import RandomSource
from ogsched.single_machine import SymmetricSolver

# ------------------------------------------------------------ thresholds


def test_threshold_support_k4():
    assert threshold_support(4) == [(1.0, 0.5), (0.75, 0.25), (0.5, 0.125), (0.25, 0.0625), (0.0, 0.0625)]


@pytest.mark.parametrize("K", [1, 2, 3, 7])
def test_threshold_masses_sum_to_one(K):
    assert sum(p for _, p in threshold_support(K)) == pytest.approx(1.0, abs=1e-15)


def test_threshold_empirical_frequencies():
    g = np.random.default_rng(2024)
    T = 10 ** 6
    counts: dict[float, int] = {}
    for _ in range(T):
        v = sample_threshold_multiplier(4, g).value
        counts[v] = counts.get(v, 0) + 1
    for v, p in threshold_support(4):
        sigma = math.sqrt(p * (1 - p) / T)
        assert abs(counts.get(v, 0) / T - p) <= 3 * sigma


def test_threshold_sampling_deterministic():
    a = [sample_threshold_multiplier(5, RandomSource(9).stream("t", i)).value for i in range(20)]
    b = [sample_threshold_multiplier(5, RandomSource(9).stream("t", i)).value for i in range(20)]
    assert a == b


# ------------------------------------------------------------------ OBCM


def test_obcm_zero_thresholds_activate_immediately():
    sc = SetCoverInstance((2, 1, 1), ((1, 2), (0,), (0, 1)))
    res = run_obcm(sc, 4, 3, tau_bar=[0, 0, 0])
    assert res.active[0] == 1
    assert res.covered[1][0] == 0


@pytest.mark.parametrize("n", [1, 4, 7])
def test_obcm_single_set_hand_simulation(n):
    sc = SetCoverInstance((3.0,), tuple((0,) for _ in range(n)))
    for tb, _ in threshold_support(default_K(1, 2)):
        if tb == 0:
            continue
        res = run_obcm(sc, 3.0, n, tau_bar=[tb])
        assert res.covered_count == n - math.ceil(tb * n / 2 - 1e-12) + 1


def test_obcm_zero_budget():
    sc = SetCoverInstance((1, 1), ((0,), (1,)))
    res = run_obcm(sc, 0.0, 2, RandomSource(1))
    assert res.active == [] and res.covered_count == 0


def test_obcm_drops_sets_above_budget():
    sc = SetCoverInstance((5, 1), ((0, 1), (0, 1)))
    res = run_obcm(sc, 2, 2, tau_bar=[0, 0])
    assert res.active == [1]


def test_obcm_activation_guard_allows_one_overshoot():
    g = np.random.default_rng(4)
    for s in range(200):
        sc = generate_set_cover(15, 6, 0.4, (1, 4), g)
        res = run_obcm(sc, 3.0, 8, RandomSource(s))
        spent = 0.0
        for i in res.active:
            assert spent <= 3.0 + 1e-12
            spent += sc.costs[i]
        assert res.cost == pytest.approx(spent)
        for coin in (False, True):
            assert sc.cover_cost(res.kept_sets(coin)) <= 3.0 + 1e-12


def test_obcm_attributes_to_earliest_active_set():
    g = np.random.default_rng(5)
    for s in range(100):
        sc = generate_set_cover(12, 5, 0.5, (1, 3), g)
        res = run_obcm(sc, 4.0, 6, RandomSource(s))
        when = {}
        for ev, j, i in res.events:
            if ev == "activate":
                when[i] = j
        for i, elems in res.covered.items():
            for j in elems:
                earlier = [a for a in res.active if when[a] <= j and a in sc.elements[j]]
                assert earlier[0] == i


def test_obcm_wrapper_half_in_expectation():
    g = np.random.default_rng(6)
    for s in range(200):
        sc = generate_set_cover(12, 5, 0.4, (1, 3), g)
        res = run_obcm(sc, 3.0, 6, RandomSource(s))
        assert res.kept_covered(False) + res.kept_covered(True) >= res.covered_count


def test_obcm_online_wrapper_matches_post_hoc():
    g = np.random.default_rng(7)
    for s in range(100):
        sc = generate_set_cover(12, 5, 0.4, (1, 3), g)
        eng = OBCMEngine(sc.costs, 3.0, 6, rng=RandomSource(s), wrapper="online")
        kept = [eng.offer(j, e) for j, e in enumerate(sc.elements)]
        res = eng.result()
        if res.violator is not None:
            expected = set(res.kept_sets(eng.coin))
        else:
            expected = set() if eng.coin else set(res.active)
        assert {i for i in kept if i is not None} <= expected
        assert sum(i is not None for i in kept) == sum(len(res.covered[i]) for i in expected)


# ------------------------------------------------------ activation engine


def _binst(m, jobs, agg, B, b, inner=None):
    return BudgetedInstance(m=m, r=1, inner_norms=inner or (Lp(1),) * m, aggregate=agg, budget=B,
                            jobs=tuple(jobs), machine_budgets=b)


def test_single_machine_zero_threshold():
    agg = SumPowers(2, (1.5,))
    binst = _binst(1, [[[1.0]], [[1.0]]], agg, 10, (2.0,))
    res = run_budgeted_pbounded(binst, 2, 2, tau_bar=[0.0])
    assert res.active == [0]
    assert ("activate", 0, 0) in res.events
    assert res.machines[0].a == pytest.approx(activation_cost(agg, [1], [2.0]))


def test_guard_stops_activations():
    g = np.random.default_rng(8)
    for s in range(150):
        binst = generate_budgeted(8, 4, 2.0, g)
        res = run_budgeted_pbounded(binst, 2, 4, rng=RandomSource(s))
        y = [0] * binst.m
        for ev, j, i in res.events:
            value = activation_cost(binst.aggregate, y, binst.machine_budgets)
            if ev == "activate":
                assert value < res.declared_budget
                y[i] = 1
            elif ev == "guard-stop":
                assert value >= res.declared_budget * (1 - 1e-12)


def _reference_alg2(binst, s, opt, tau_bar, guesses):
    """Direct transcription of the p-bounded algorithm for symmetric inner norms."""
    m, f, b, B = binst.m, binst.aggregate, binst.machine_budgets, binst.budget
    p = f.p

    def val(y):
        return activation_cost(f, y, b)
    y = [0] * m
    active, offered, solvers, placed = [], {i: [] for i in range(m)}, {}, {}
    unit = [val([1 if t == i else 0 for t in range(m)]) for i in range(m)]
    for j, job in enumerate(binst.jobs):
        done = False
        for i in active:
            k = solvers[i].offer(j, job[i])
            if k is not None:
                placed[j] = (i, k)
                done = True
                break
        if done:
            continue
        for i in range(m):
            if y[i] or unit[i] > B * (1 + 1e-12):
                continue
            offered[i].append(j)
            opt_i = bf_norm_pack(binst.inner_norms[i], [binst.jobs[t][i] for t in offered[i]], b[i],
                                 job_ids=offered[i])
            y1 = list(y)
            y1[i] = 1
            a = val(y1) - val(y)
            tau = tau_bar[i] * opt * a / (10 * (s + 1) ** p * B)
            if opt_i < tau - 1e-12 * max(1, tau):
                continue
            if not val(y) < s ** p * B:
                continue
            y[i] = 1
            active.append(i)
            solvers[i] = SymmetricSolver(binst.inner_norms[i], b[i], max(guesses[i], 1))
            k = solvers[i].offer(j, job[i])
            if k is not None:
                placed[j] = (i, k)
                break
    return active, placed


def test_pbounded_trace_matches_hand_simulation():
    jobs = [[[0.3], [0.5]], [[0.4], [0.2]], [[0.6], [0.3]], [[0.2], [0.4]]]
    binst = _binst(2, jobs, SumPowers(2, (1.0, 1.0)), 2.0, (1.4, 1.2))
    opt = 40.0
    K = default_K(2, 3)
    support = [v for v, _ in threshold_support(K)]
    dyadic = [opt / 2, opt / 4]
    seen = set()
    for t1, t2, g1, g2 in itertools.product(support, support, dyadic, dyadic):
        res = run_budgeted_pbounded(binst, 1.0, opt, tau_bar=[t1, t2], guesses=[g1, g2])
        active, placed = _reference_alg2(binst, 1.0, opt, [t1, t2], [g1, g2])
        assert res.active == active
        assert res.assignment.placements == placed
        seen.add((tuple(active), tuple(sorted(placed.items()))))
    assert len(seen) >= 4


def test_wl1_unit_weights_activation_count():
    g = np.random.default_rng(9)
    for s in range(100):
        m, kap = 6, int(g.integers(1, 4))
        jobs = g.uniform(0.2, 1.0, size=(10, m, 1))
        binst = _binst(m, jobs, NormAgg(WeightedL1((1.0,) * m)), float(kap), (1.0,) * m)
        res = run_budgeted_wl1(binst, [1.0] * m, 5, rng=RandomSource(s))
        assert len(res.active) <= kap + 1


def test_wl1_scaled_guess_formula():
    rule = WeightedL1Rule([1.0] * 4, 1.0, 120.0, 4)
    found = set()
    for s in range(64):
        val, branch = rule.guess(0, 1.0, RandomSource(s).stream("g"))
        found.add(branch)
        if branch == "scaled":
            assert val == pytest.approx(1.0)
        else:
            assert val in (60.0, 30.0, 15.0, 7.5)
    assert found == {"scaled", "dyadic"}


def test_wl1_matches_pbounded_on_dyadic_branch():
    g = np.random.default_rng(10)
    for s in range(60):
        m = 4
        w = tuple(g.uniform(0.3, 2, size=m))
        b = tuple(g.uniform(1, 3, size=m))
        B = float(g.uniform(2, 6))
        binst = _binst(m, g.uniform(0.3, 2, size=(8, m, 1)), NormAgg(WeightedL1(w)), B, b)
        r1 = run_budgeted_pbounded(binst, 1.0, 6, rng=RandomSource(s))
        r2 = run_budgeted_wl1(binst, w, 6, rng=RandomSource(s), force_dyadic=True)
        assert r1.events == r2.events
        assert r1.assignment.placements == r2.assignment.placements


def test_budget_wrapper_branches():
    g = np.random.default_rng(11)
    saw_violation = saw_clean = False
    for s in range(200):
        binst = generate_budgeted(8, 4, 1.0, g)
        res = run_budgeted_pbounded(binst, 1.0, 6, rng=RandomSource(s))
        if res.violator is None:
            saw_clean = True
            for coin in (False, True):
                assert budget_wrapper(res, coin).placements == res.assignment.placements
            continue
        saw_violation = True
        t = res.machines[res.violator].time
        before = {i for i in res.active if res.machines[i].time < t}
        a0, a1 = budget_wrapper(res, False), budget_wrapper(res, True)
        assert {i for i, _ in a0.placements.values()} <= before
        assert {i for i, _ in a1.placements.values()} <= {res.violator}
        assert a0.count + a1.count == res.scheduled
        for a in (a0, a1):
            assert activation_cost(binst.aggregate, a.y, binst.machine_budgets) <= res.declared_budget * (1 + 1e-12)
    assert saw_violation and saw_clean


def test_inner_loads_respect_machine_budgets():
    g = np.random.default_rng(12)
    from ogsched.instance import machine_load
    for s in range(100):
        binst = generate_budgeted(8, 4, 2.0, g)
        res = run_budgeted_pbounded(binst, 2.0, 4, rng=RandomSource(s))
        for i in res.active:
            assert machine_load(binst, res.assignment, i) <= binst.machine_budgets[i] * (1 + 1e-9)


def test_offered_sets_frozen_after_activation():
    g = np.random.default_rng(13)
    for s in range(100):
        binst = generate_budgeted(8, 4, 2.0, g)
        res = run_budgeted_pbounded(binst, 2.0, 4, rng=RandomSource(s))
        act = {i: j for ev, j, i in res.events if ev == "activate"}
        for i, rec in enumerate(res.machines):
            if rec.active:
                assert max(rec.offered) == act[i]
                assert all(j > act[i] for j in rec.post if j != act[i])
            else:
                assert rec.post == [] and rec.alg == []


def test_engine_rejects_nonpositive_guess():
    binst = _binst(1, [[[1.0]]], SumPowers(1, (1.0,)), 1, (1.0,), inner=(LInf(),))
    with pytest.raises(ValueError):
        run_budgeted_pbounded(binst, 1, 0)
