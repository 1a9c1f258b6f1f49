import numpy as np
import pytest

from ogsched import _kernels_py, kernels

compiled = pytest.importorskip("ogsched._kernels")


@pytest.mark.parametrize("mode", ["sum", "max"])
def test_subset_dp_backends_agree(mode):
    g = np.random.default_rng(0)
    code = {"sum": 0, "max": 1}[mode]
    for m in range(0, 8):
        prev = g.uniform(0, 5, size=1 << m)
        prev[g.random(1 << m) < 0.2] = np.inf
        table = g.uniform(0, 5, size=1 << m)
        a, ca = compiled.subset_dp(prev, table, code)
        b, cb = _kernels_py.subset_dp(prev, table, code)
        assert np.array_equal(a, b)
        assert np.array_equal(ca, cb)


def test_subset_dp_brute_force():
    g = np.random.default_rng(1)
    prev = g.uniform(0, 5, size=16)
    table = g.uniform(0, 5, size=16)
    out, _ = kernels.subset_dp(prev, table, "sum")
    for S in range(16):
        subs = [T for T in range(16) if T & S == T]
        assert out[S] == min(prev[S ^ T] + table[T] for T in subs)


def test_cover_table_backends_agree():
    g = np.random.default_rng(2)
    masks = g.integers(0, 2 ** 10, size=6).astype(np.uint64)
    costs = g.uniform(1, 3, size=6)
    a = compiled.cover_table(masks, costs)
    b = _kernels_py.cover_table(masks, costs)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    for S in range(64):
        assert b[0][S] == pytest.approx(sum(costs[i] for i in range(6) if S >> i & 1))


def test_size_mismatch_rejected():
    with pytest.raises(ValueError):
        _kernels_py.subset_dp(np.zeros(4), np.zeros(2), 0)


def test_backend_name():
    assert kernels.BACKEND in ("compiled", "python")
