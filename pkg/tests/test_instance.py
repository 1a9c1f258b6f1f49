import itertools
import json

import numpy as np
import pytest

from ogsched.instance import (Assignment, BudgetedInstance, Instance, OnlineSession, PlacementError,
                              SetCoverInstance, assignment_cost, gensched_to_osc, instance_from_json,
                              instance_to_json, load_any, machine_load, osc_to_gensched,
                              setcover_from_json, setcover_to_json, stream)
from ogsched.norms import INF, LInf, Lp, NormAgg, WeightedL1
from ogsched.oracle import opt_gen_sched


def _inst(inner, jobs, agg=None, m=1):
    return Instance(m=m, r=1, inner_norms=(inner,) * m, aggregate=agg or NormAgg(LInf()), budget=1.0,
                    jobs=tuple(jobs))


def test_machine_load_examples():
    inst = _inst(LInf(), [[[2.0]], [[5.0]]])
    a = Assignment(1)
    assert machine_load(inst, a, 0) == 0
    a.place(0, 0, 0)
    a.place(1, 0, 0)
    assert machine_load(inst, a, 0) == 5
    inst2 = _inst(WeightedL1((1.0, 1.0)), [[[2.0]], [[5.0]]])
    assert machine_load(inst2, a, 0) == 7


def test_assignment_cost_examples():
    inst = Instance(m=2, r=1, inner_norms=(LInf(), LInf()), aggregate=NormAgg(Lp(2)), budget=0,
                    jobs=([[3.0], [1.0]],))
    assert assignment_cost(inst, Assignment(2)) == 0
    a = Assignment(2)
    a.place(0, 0, 0)
    assert assignment_cost(inst, a) == pytest.approx(3)


def test_osc_examples():
    sc = SetCoverInstance((7.0,), ((0,), (0,)))
    inst = osc_to_gensched(sc)
    a = Assignment(1)
    a.place(0, 0, 0)
    a.place(1, 0, 0)
    assert assignment_cost(inst, a) == 7
    sc2 = SetCoverInstance((1.0, 2.0), ((0,), (1,)))
    b = Assignment(2)
    b.place(0, 0, 0)
    b.place(1, 1, 0)
    assert assignment_cost(osc_to_gensched(sc2), b) == 3


def test_uncoverable_element_is_flagged():
    sc = SetCoverInstance((1.0, 1.0), ((0,), ()))
    assert not sc.feasible
    from ogsched.oracle import InfeasibleInstance, opt_osc
    assert opt_osc(sc)[0] == INF
    with pytest.raises(InfeasibleInstance):
        opt_gen_sched(osc_to_gensched(sc))


def _covers(sc):
    """Every assignment of elements to containing sets."""
    return itertools.product(*[list(e) for e in sc.elements])


@pytest.mark.parametrize("seed", range(6))
def test_osc_encoding_cost_equals_cover_cost(seed):
    g = np.random.default_rng(seed)
    for _ in range(15):
        m, n = int(g.integers(1, 5)), int(g.integers(1, 7))
        costs = tuple(g.uniform(0.5, 3, size=m))
        elems = tuple(tuple(i for i in range(m) if g.random() < 0.5) or (int(g.integers(m)),)
                      for _ in range(n))
        sc = SetCoverInstance(costs, elems)
        inst = osc_to_gensched(sc)
        for choice in _covers(sc):
            a = Assignment(m)
            for j, i in enumerate(choice):
                a.place(j, i, 0)
            assert assignment_cost(inst, a) == pytest.approx(sc.cover_cost(set(choice)))


def test_osc_roundtrip_through_gensched():
    sc = SetCoverInstance((3.0, 1.0, 1.0), ((0, 1), (0, 2)))
    assert gensched_to_osc(osc_to_gensched(sc)) == sc


def test_stream_order_and_determinism():
    assert list(stream(_inst(LInf(), []))) == []
    inst = _inst(LInf(), [[[1.0]], [[2.0]], [[3.0]]])
    first = [j for j, _ in stream(inst)]
    assert first == [0, 1, 2]
    assert [j for j, _ in stream(inst)] == first


def test_irrevocable_placement():
    a = Assignment(2)
    a.place(0, 1, 0)
    assert a.y == [0, 1]
    with pytest.raises(PlacementError):
        a.place(0, 0, 0)


def test_online_session_requires_decision_before_next_job():
    inst = _inst(LInf(), [[[1.0]], [[2.0]]])
    s = OnlineSession(inst)
    j, _ = next(s)
    with pytest.raises(PlacementError):
        next(s)
    s.decide(j, (0, 0))
    with pytest.raises(PlacementError):
        s.decide(j, (0, 0))
    j2, _ = next(s)
    s.decide(j2, None)
    with pytest.raises(StopIteration):
        next(s)
    assert s.assignment.placements == {0: (0, 0)}


def test_jobs_are_immutable():
    inst = _inst(LInf(), [[[1.0]]])
    with pytest.raises(ValueError):
        inst.jobs[0][0, 0] = 5.0


def test_invalid_loads_and_budgets():
    with pytest.raises(ValueError):
        _inst(LInf(), [[[-1.0]]])
    with pytest.raises(ValueError):
        Instance(m=1, r=1, inner_norms=(LInf(),), aggregate=NormAgg(LInf()), budget=-1)
    with pytest.raises(ValueError):
        BudgetedInstance(m=1, r=1, inner_norms=(LInf(),), aggregate=NormAgg(LInf()), budget=1,
                         machine_budgets=(-1.0,))
    with pytest.raises(ValueError):
        SetCoverInstance((0.0,), ((0,),))


def test_json_roundtrip(tmp_path):
    inst = BudgetedInstance(m=2, r=2, inner_norms=(LInf(), Lp(2)), aggregate=NormAgg(WeightedL1((1, 2))),
                            budget=3.0, jobs=([[1, INF], [2, 3]],), machine_budgets=(1.0, 2.0))
    d = instance_to_json(inst)
    assert d["jobs"][0][1] == "inf"
    back = instance_from_json(json.loads(json.dumps(d)))
    assert back.machine_budgets == inst.machine_budgets
    assert np.array_equal(back.jobs[0], inst.jobs[0])
    sc = SetCoverInstance((1.0, 2.0), ((0, 1), (1,)))
    assert setcover_from_json(setcover_to_json(sc)) == sc
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(setcover_to_json(sc)))
    assert load_any(str(p)) == sc
