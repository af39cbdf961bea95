"""Monomial basis ordering, evaluation and derivative helpers."""

import numpy as np
import pytest

from vidrom import InputError, MultiIndexBasis, term_count

from oracles import monomials_brute


def test_ordering_two_vars_orders_two_to_three():
    basis = MultiIndexBasis(2, 2, 3)
    expected = [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]
    assert [tuple(e) for e in basis.exponents] == expected
    assert len(basis) == 7
    assert basis.index_of((1, 1)) == 1
    assert basis.index_of((0, 3)) == 6
    with pytest.raises(InputError):
        basis.index_of((4, 0))


def test_ordering_three_vars_quadratic():
    basis = MultiIndexBasis(3, 2, 2)
    expected = [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]
    assert [tuple(e) for e in basis.exponents] == expected


def test_term_count_matches_enumeration():
    for num_vars in (1, 2, 3, 4):
        for lo in range(0, 4):
            for hi in range(lo, 5):
                basis = MultiIndexBasis(num_vars, lo, hi)
                assert len(basis) == term_count(num_vars, lo, hi)


def test_constructor_validation():
    with pytest.raises(InputError):
        MultiIndexBasis(0, 1, 2)
    with pytest.raises(InputError):
        MultiIndexBasis(2, -1, 2)
    with pytest.raises(InputError):
        MultiIndexBasis(2, 3, 2)


def test_evaluate_hand_case():
    basis = MultiIndexBasis(2, 2, 3)
    vals = basis.evaluate(np.array([2.0, 3.0]))
    # x^2, xy, y^2, x^3, x^2 y, x y^2, y^3 at (2, 3)
    assert np.array_equal(vals, [4.0, 6.0, 9.0, 8.0, 12.0, 18.0, 27.0])


def test_evaluate_matches_brute_force():
    rng = np.random.default_rng(5)
    for num_vars, lo, hi in [(1, 1, 4), (2, 2, 3), (3, 0, 3), (4, 2, 2)]:
        basis = MultiIndexBasis(num_vars, lo, hi)
        pts = rng.standard_normal((6, num_vars))
        got = basis.evaluate(pts)
        for j in range(pts.shape[0]):
            want = monomials_brute(pts[j], basis.exponents)
            assert np.allclose(got[j], want, rtol=1e-12, atol=1e-14)


def test_evaluate_complex_points():
    basis = MultiIndexBasis(2, 2, 2)
    z = np.array([1.0 + 1.0j, 2.0 - 1.0j])
    vals = basis.evaluate(z)
    assert vals.dtype.kind == "c"
    assert vals[0] == z[0] ** 2
    assert vals[1] == z[0] * z[1]
    assert vals[2] == z[1] ** 2


def test_evaluate_shapes_and_errors():
    basis = MultiIndexBasis(2, 1, 2)
    single = basis.evaluate([1.0, 2.0])
    assert single.shape == (len(basis),)
    batch = basis.evaluate(np.ones((4, 2)))
    assert batch.shape == (4, len(basis))
    with pytest.raises(InputError):
        basis.evaluate(np.ones((4, 3)))


def test_directional_derivative_matches_finite_differences():
    rng = np.random.default_rng(8)
    basis = MultiIndexBasis(3, 1, 3)
    pts = rng.standard_normal((5, 3))
    vel = rng.standard_normal((5, 3))
    got = basis.directional_derivative(pts, vel)
    h = 1e-6
    fd = (basis.evaluate(pts + h * vel) - basis.evaluate(pts - h * vel)) / (2 * h)
    assert np.allclose(got, fd, rtol=1e-7, atol=1e-7)


def test_directional_derivative_hand_case():
    basis = MultiIndexBasis(2, 2, 2)
    # d/dt of (x^2, xy, y^2) at (x, y) = (2, 3) with velocity (5, 7)
    got = basis.directional_derivative([2.0, 3.0], [5.0, 7.0])
    assert np.allclose(got, [2 * 2 * 5, 3 * 5 + 2 * 7, 2 * 3 * 7])


def test_gradient_weighted_matches_loop():
    rng = np.random.default_rng(12)
    basis = MultiIndexBasis(2, 2, 3)
    pts = rng.standard_normal((4, 2))
    w = rng.standard_normal((4, len(basis)))
    got = basis.gradient_weighted(pts, w)
    want = np.zeros((4, 2))
    for j in range(4):
        for k, exp in enumerate(basis.exponents):
            for i in range(2):
                if exp[i] == 0:
                    continue
                reduced = exp.copy()
                reduced[i] -= 1
                mono = pts[j, 0] ** reduced[0] * pts[j, 1] ** reduced[1]
                want[j, i] += w[j, k] * exp[i] * mono
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_gradient_weighted_shape_errors():
    basis = MultiIndexBasis(2, 1, 2)
    with pytest.raises(InputError):
        basis.gradient_weighted(np.ones((3, 2)), np.ones((3, len(basis) + 1)))
