import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitstat.core import (
    DataTable,
    InsufficientSampleError,
    InvalidArgumentError,
    SeedSpec,
    partition_predefined,
    partition_random,
)
from splitstat.symstat import (
    Kernel,
    distributed_u_stat,
    gini_kernel,
    hoeffding_alpha_hat,
    product_kernel,
    u_stat,
    u_stat_weighted,
    v_statistic,
)

from _oracles import (
    alpha_hat_brute,
    gini_sorted,
    u_stat_brute,
    u_stat_weighted_brute,
)

rng = np.random.default_rng(20240817)


def gini_func(x, y):
    return abs(float(x[0]) - float(y[0]))


# ---------------------------------------------------------------------------
# Kernel construction
# ---------------------------------------------------------------------------

def test_kernel_rejects_degree_out_of_range():
    for bad in (0, 5, -1, 7):
        with pytest.raises(InvalidArgumentError):
            Kernel(degree=bad, func=lambda *a: 0.0)


def test_builtin_kernel_names():
    assert gini_kernel().name == "gini"
    assert product_kernel(0.0).name == "product(0)"
    assert gini_kernel().degree == 2


# ---------------------------------------------------------------------------
# u_stat against brute-force enumeration
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 7, 40, 251])
def test_gini_matches_enumeration(n):
    x = rng.normal(size=n)
    got = u_stat(DataTable(x), gini_kernel())
    want = u_stat_brute(x, gini_func, 2)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("n", [2, 5, 64])
def test_product_kernel_matches_enumeration(n):
    x = rng.normal(size=n)
    k = product_kernel(0.7)
    want = u_stat_brute(x, lambda a, b: (a[0] - 0.7) * (b[0] - 0.7), 2)
    assert u_stat(DataTable(x), k) == pytest.approx(want, rel=1e-11, abs=1e-13)


def test_degree2_without_hook_uses_enumeration():
    x = rng.normal(size=15)
    k = Kernel(degree=2, func=gini_func, name="gini-slow")
    assert u_stat(x, k) == pytest.approx(u_stat_brute(x, gini_func, 2), rel=1e-12)


def test_degree1_is_plain_mean():
    x = rng.normal(size=30)
    k = Kernel(degree=1, func=lambda a: float(a[0]) ** 2, name="m2")
    assert u_stat(x, k) == pytest.approx(float(np.mean(x**2)), rel=1e-12)


@pytest.mark.parametrize("m", [3, 4])
def test_higher_degree_enumeration(m):
    x = rng.normal(size=9)

    def h(*rows):
        return float(np.prod([r[0] for r in rows]))

    k = Kernel(degree=m, func=h, name=f"prod{m}")
    assert u_stat(x, k) == pytest.approx(u_stat_brute(x, h, m), rel=1e-11, abs=1e-13)


def test_u_stat_insufficient_sample():
    with pytest.raises(InsufficientSampleError):
        u_stat(np.array([1.0]), gini_kernel())
    with pytest.raises(InsufficientSampleError):
        u_stat(np.array([1.0, 2.0]), Kernel(degree=3, func=lambda *a: 0.0))


def test_gini_rejects_multicolumn_rows():
    X = rng.normal(size=(6, 2))
    with pytest.raises(InvalidArgumentError):
        u_stat(DataTable(X), gini_kernel())


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        min_size=2,
        max_size=120,
    )
)
def test_gini_matches_sorted_identity(xs):
    x = np.asarray(xs)
    got = u_stat(DataTable(x), gini_kernel())
    assert got == pytest.approx(gini_sorted(x), rel=1e-9, abs=1e-9)


def test_chunked_pair_sum_matches_single_chunk(monkeypatch):
    import splitstat.symstat as sym

    x = rng.normal(size=300)
    whole = u_stat(DataTable(x), gini_kernel())
    monkeypatch.setattr(sym, "_CHUNK_ELEMS", 2048)  # forces many row chunks
    chunked = u_stat(DataTable(x), gini_kernel())
    assert chunked == pytest.approx(whole, rel=1e-13)


# ---------------------------------------------------------------------------
# Weighted evaluation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("trial", range(8))
def test_weighted_gini_matches_expansion(trial):
    r = np.random.default_rng(500 + trial)
    n = int(r.integers(2, 9))
    x = r.normal(size=n)
    w = r.integers(0, 4, size=n)
    if w.sum() < 2:
        w[0] += 2
    got = u_stat_weighted(DataTable(x), w, gini_kernel())
    want = u_stat_weighted_brute(x, w, gini_func, 2)
    assert got == pytest.approx(want, rel=1e-11, abs=1e-13)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_weighted_generic_matches_expansion(m):
    r = np.random.default_rng(900 + m)

    def h(*rows):
        return float(np.mean([r_[0] for r_ in rows]) ** 2)

    k = Kernel(degree=m, func=h, name="meansq")
    for _ in range(6):
        n = int(r.integers(2, 8))
        x = r.normal(size=n)
        w = r.integers(0, 4, size=n)
        if w.sum() < m:
            w[: m] = w[: m] + 1
            if w.sum() < m:
                w[0] += m
        got = u_stat_weighted(DataTable(x), w, k)
        want = u_stat_weighted_brute(x, w, h, m)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-13)


def test_weighted_all_ones_equals_plain():
    x = rng.normal(size=25)
    w = np.ones(25, dtype=int)
    assert u_stat_weighted(DataTable(x), w, gini_kernel()) == pytest.approx(
        u_stat(DataTable(x), gini_kernel()), rel=1e-13
    )


def test_weighted_validation():
    x = np.array([1.0, 2.0, 3.0])
    k = gini_kernel()
    with pytest.raises(InvalidArgumentError):
        u_stat_weighted(x, [1, -1, 2], k)
    with pytest.raises(InvalidArgumentError):
        u_stat_weighted(x, [0.5, 1.0, 1.0], k)
    with pytest.raises(InvalidArgumentError):
        u_stat_weighted(x, [1, 2], k)
    with pytest.raises(InsufficientSampleError):
        u_stat_weighted(x, [1, 0, 0], k)
    with pytest.raises(InvalidArgumentError):
        u_stat_weighted(x, [1, 1, 1], Kernel(degree=1, func=lambda a: 0.0))


def test_weighted_accepts_integer_valued_floats():
    x = np.array([0.0, 1.0, 5.0])
    got = u_stat_weighted(x, np.array([2.0, 1.0, 0.0]), gini_kernel())
    want = u_stat_weighted_brute(x, [2, 1, 0], gini_func, 2)
    assert got == pytest.approx(want, rel=1e-13)


# ---------------------------------------------------------------------------
# Distributed aggregation
# ---------------------------------------------------------------------------

def test_distributed_matches_manual_aggregate():
    x = rng.normal(size=200)
    table = DataTable(x)
    part = partition_random(table, 7, SeedSpec(11))
    est = distributed_u_stat(table, part, gini_kernel())
    assert est.K == 7
    assert est.N == 200
    manual = np.array(
        [u_stat(x[part.block_rows(k)], gini_kernel()) for k in range(7)]
    )
    np.testing.assert_allclose(est.per_block, manual, rtol=1e-13)
    want = math.fsum(
        part.sizes[k] * manual[k] for k in range(7)
    ) / 200.0
    assert est.aggregate == pytest.approx(want, rel=1e-14)


def test_distributed_single_block_is_exact():
    x = rng.normal(size=123)
    table = DataTable(x)
    part = partition_predefined(np.zeros(123, dtype=int))
    est = distributed_u_stat(table, part, gini_kernel())
    assert est.aggregate == u_stat(table, gini_kernel())


def test_distributed_names_offending_block():
    assignment = np.array([0, 0, 1, 2, 2])  # block 1 has a single row
    part = partition_predefined(assignment)
    with pytest.raises(InsufficientSampleError, match="block 1"):
        distributed_u_stat(np.arange(5.0), part, gini_kernel())


def test_distributed_size_mismatch():
    part = partition_predefined([0, 0, 1, 1])
    with pytest.raises(InvalidArgumentError):
        distributed_u_stat(np.arange(6.0), part, gini_kernel())


# ---------------------------------------------------------------------------
# First projection and plug-in statistic
# ---------------------------------------------------------------------------

def test_alpha_hat_three_point_fixture():
    a = hoeffding_alpha_hat(np.array([0.0, 1.0, 2.0]), gini_kernel())
    np.testing.assert_allclose(a, [2 / 9, -4 / 9, 2 / 9], rtol=1e-14)


def test_v_statistic_three_point_fixture():
    assert v_statistic(np.array([0.0, 1.0, 2.0]), gini_kernel()) == pytest.approx(
        8 / 9, rel=1e-14
    )


@pytest.mark.parametrize("n", [2, 17, 101])
def test_alpha_hat_matches_brute(n):
    x = rng.normal(size=n)
    got = hoeffding_alpha_hat(x, gini_kernel())
    want = alpha_hat_brute(x, gini_func)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)
    assert math.fsum(got.tolist()) == pytest.approx(0.0, abs=1e-10)


def test_alpha_hat_without_hook_matches_hooked():
    x = rng.normal(size=40)
    slow = Kernel(degree=2, func=gini_func, name="gini-slow")
    np.testing.assert_allclose(
        hoeffding_alpha_hat(x, slow),
        hoeffding_alpha_hat(x, gini_kernel()),
        rtol=1e-11,
    )


def test_alpha_hat_validation():
    with pytest.raises(InvalidArgumentError):
        hoeffding_alpha_hat(np.arange(4.0), Kernel(degree=3, func=lambda *a: 0.0))
    with pytest.raises(InsufficientSampleError):
        hoeffding_alpha_hat(np.array([1.0]), gini_kernel())
