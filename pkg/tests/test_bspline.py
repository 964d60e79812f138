import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from igaieti.bspline import (KnotVector, TensorSplineSpace, collocation_matrix, eval_basis,
                             eval_basis_many, knot_insertion_matrix, make_knots,
                             make_uniform_space, uniform_refine)


def cox_de_boor(t, i, p, x):
    """Direct recursive definition with the right-closed convention at x = 1."""
    if p == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        # x = 1 belongs to the last nonempty span
        if x == t[-1] and t[i] < t[i + 1] == t[-1]:
            return 1.0
        return 0.0
    out = 0.0
    if t[i + p] > t[i]:
        out += (x - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, x)
    if t[i + p + 1] > t[i + 1]:
        out += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, x)
    return out


def test_make_uniform_space_examples():
    kv = make_knots(1, 0)
    assert kv.knots.tolist() == [0, 0, 1, 1]
    assert kv.numdofs == 2
    kv = make_knots(2, 1)
    assert kv.knots.tolist() == [0, 0, 0, 0.5, 1, 1, 1]
    assert kv.numdofs == 4
    sp = make_uniform_space(3, 2)
    assert sp.dims == (7, 7)
    assert sp.size == 49
    assert sp.quasi_uniformity == 1.0
    assert sp.h_max == 0.25


def test_invalid_knot_vectors():
    with pytest.raises(ValueError):
        KnotVector(0, [0, 1])
    with pytest.raises(ValueError):
        KnotVector(2, [0, 0, 1, 1, 1, 1])
    with pytest.raises(ValueError):
        KnotVector(1, [0, 0, 0.7, 0.5, 1, 1])
    with pytest.raises(ValueError):
        KnotVector(1, [0, 0, 0.5, 0.5, 1, 1])
    with pytest.raises(ValueError):
        make_uniform_space(0, 1)
    with pytest.raises(ValueError):
        make_knots(2, -1)


def test_hat_function_symmetry():
    first, vals = eval_basis(make_knots(1, 0), 0.5)
    assert first == 0
    assert np.allclose(vals, [0.5, 0.5])


def test_eval_outside_domain():
    for x in (-1e-9, 1.0 + 1e-9):
        with pytest.raises(ValueError):
            eval_basis(make_knots(2, 1), x)
    with pytest.raises(ValueError):
        eval_basis(make_knots(2, 1), 0.5, deriv_order=2)


def test_against_recursion_oracle_quarter():
    kv = make_knots(2, 1)
    first, vals = eval_basis(kv, 0.25)
    ref = [cox_de_boor(kv.knots, first + r, 2, 0.25) for r in range(3)]
    assert np.allclose(vals, ref, atol=1e-14)
    # hand values at 0.25 of the degree-2 basis with knots (0,0,0,1/2,1,1,1)
    assert np.allclose(vals, [0.25, 0.625, 0.125])


@pytest.mark.parametrize('p,levels', [(1, 2), (2, 0), (2, 3), (3, 2), (4, 1)])
def test_against_recursion_oracle_everywhere(p, levels):
    kv = make_knots(p, levels)
    xs = np.concatenate([np.linspace(0, 1, 37), [1.0]])
    M = collocation_matrix(kv, xs)
    ref = np.array([[cox_de_boor(kv.knots, i, p, x) for i in range(kv.numdofs)] for x in xs])
    assert np.allclose(M, ref, atol=1e-13)


@pytest.mark.parametrize('p,levels', [(1, 3), (2, 2), (3, 3), (5, 1)])
def test_partition_of_unity_and_support(p, levels):
    kv = make_knots(p, levels)
    xs = np.random.default_rng(0).random(1000)
    first, vals, _ = eval_basis_many(kv, xs)
    assert np.abs(vals.sum(1) - 1).max() <= 1e-12
    assert vals.min() >= 0
    assert vals.shape[1] == p + 1
    assert np.all(first >= 0) and np.all(first + p < kv.numdofs)


@pytest.mark.parametrize('p', [1, 2, 3, 4])
def test_derivative_matches_finite_differences(p):
    kv = make_knots(p, 2)
    h = 1e-6
    # stay away from knots, where derivatives of C^0 / C^1 splines jump
    xs = np.random.default_rng(1).uniform(0.01, 0.24, 20) + 0.25 * np.arange(20) % 1.0
    for x in xs:
        first, d = eval_basis(kv, x, 1)
        fp, vp = eval_basis(kv, x + h)
        fm, vm = eval_basis(kv, x - h)
        assert fp == fm == first
        assert np.allclose(d, (vp - vm) / (2 * h), atol=1e-5)


def test_derivative_sum_is_zero():
    kv = make_knots(3, 2)
    for x in np.linspace(0, 1, 13):
        assert abs(eval_basis(kv, x, 1)[1].sum()) < 1e-12


def test_refine_examples():
    kv = make_knots(1, 0).refine()
    assert kv.knots.tolist() == [0, 0, 0.5, 1, 1]
    for p in (1, 2, 3):
        for l in (0, 1, 2):
            n = make_knots(p, l).numdofs
            assert make_knots(p, l).refine().numdofs == 2 * n - p
            assert make_knots(p, l).refine() == make_knots(p, l + 1)
    sp = uniform_refine(make_uniform_space(2, 1))
    assert sp == make_uniform_space(2, 2)
    assert sp.degree == 2


def test_knot_insertion_preserves_spline():
    rng = np.random.default_rng(2)
    old = make_knots(2, 1)
    new = old.refine()
    P = knot_insertion_matrix(old, new)
    c = rng.standard_normal(old.numdofs)
    xs = rng.random(50)
    before = collocation_matrix(old, xs) @ c
    after = collocation_matrix(new, xs) @ (P @ c)
    assert np.abs(before - after).max() <= 1e-12


def test_knot_insertion_matches_least_squares():
    old, new = make_knots(3, 1), make_knots(3, 3)
    P = knot_insertion_matrix(old, new)
    xs = np.linspace(0, 1, 200)
    Bn, Bo = collocation_matrix(new, xs), collocation_matrix(old, xs)
    ls = np.linalg.lstsq(Bn, Bo, rcond=None)[0]
    assert np.allclose(P, ls, atol=1e-10)


def test_knot_insertion_rejects_non_nested():
    with pytest.raises(ValueError):
        knot_insertion_matrix(make_knots(2, 1), KnotVector(2, [0, 0, 0, 0.3, 1, 1, 1]))


def test_reversed_knots():
    kv = KnotVector(2, [0, 0, 0, 0.25, 1, 1, 1])
    assert kv.reversed().knots.tolist() == [0, 0, 0, 0.75, 1, 1, 1]
    xs = np.linspace(0, 1, 11)
    assert np.allclose(collocation_matrix(kv, xs)[:, ::-1], collocation_matrix(kv.reversed(), 1 - xs))


def test_tensor_index_and_sizes():
    sp = TensorSplineSpace(make_knots(1, 1), make_knots(2, 1))
    assert sp.dims == (3, 4)
    assert sp.index(2, 1) == 9
    assert sp.degree == 2
    assert sp.h_min == 0.5


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 5), levels=st.integers(0, 4), x=st.floats(0, 1))
def test_property_partition_of_unity(p, levels, x):
    first, vals = eval_basis(make_knots(p, levels), x)
    assert abs(vals.sum() - 1) <= 1e-12
    assert np.all(vals >= -1e-15)


@settings(max_examples=40, deadline=None)
@given(p=st.integers(1, 4), levels=st.integers(0, 3), seed=st.integers(0, 2 ** 16))
def test_property_nestedness(p, levels, seed):
    rng = np.random.default_rng(seed)
    old = make_knots(p, levels)
    new = old.refine()
    c = rng.standard_normal(old.numdofs)
    xs = rng.random(20)
    P = knot_insertion_matrix(old, new)
    assert np.allclose(collocation_matrix(old, xs) @ c, collocation_matrix(new, xs) @ (P @ c),
                       atol=1e-12)
