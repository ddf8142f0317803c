import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_jacobi

from kdvtbc.orthopoly import (
    QuadratureRule,
    dispersive_rule,
    gauss_legendre_rule,
    inner_product,
    jacobi_roots,
    legendre_endpoint,
    legendre_eval,
    legendre_table,
)


def test_legendre_closed_form_values():
    assert legendre_eval(2, 0.5) == pytest.approx(-0.125, abs=1e-15)
    for n in (0, 1, 5, 17, 40):
        assert legendre_eval(n, 1.0) == pytest.approx(1.0, abs=1e-13)
    assert legendre_eval(3, 1.0, derivative=1) == pytest.approx(6.0)
    assert legendre_eval(3, -1.0, derivative=2) == pytest.approx(-15.0)


def test_endpoint_formulas_match_recurrence():
    pts = np.array([-1.0, 1.0])
    table = legendre_table(60, pts, nderiv=2)
    for n in range(61):
        for d in range(3):
            for col, right in ((0, False), (1, True)):
                closed = legendre_endpoint(n, d, right=right)
                rec = table[d, n, col]
                assert rec == pytest.approx(closed, rel=1e-9, abs=1e-12)


def test_jacobi_roots_legendre_cases():
    assert jacobi_roots(0, 0, 1) == pytest.approx([0.0], abs=1e-14)
    assert jacobi_roots(0, 0, 2) == pytest.approx(
        [-1 / np.sqrt(3), 1 / np.sqrt(3)], abs=1e-14
    )


def test_jacobi_roots_against_bisection():
    # independent oracle: bisection on the sign changes of P^(2,1)_3
    roots = jacobi_roots(2.0, 1.0, 3)
    f = lambda x: eval_jacobi(3, 2.0, 1.0, x)
    xs = np.linspace(-1, 1, 2001)
    vals = f(xs)
    brackets = [(xs[i], xs[i + 1]) for i in range(len(xs) - 1)
                if vals[i] * vals[i + 1] < 0]
    assert len(brackets) == 3
    oracle = []
    for lo, hi in brackets:
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if f(lo) * f(mid) <= 0:
                hi = mid
            else:
                lo = mid
        oracle.append(0.5 * (lo + hi))
    assert roots == pytest.approx(oracle, abs=1e-12)
    assert np.all(np.abs(f(roots)) < 1e-10)


def test_jacobi_roots_solver_robustness():
    # invariance under a different tridiagonal eigensolver path
    a = jacobi_roots(2.0, 1.0, 30, lapack_driver="stemr")
    b = jacobi_roots(2.0, 1.0, 30, lapack_driver="stev")
    assert np.max(np.abs(a - b)) < 1e-12


def test_gauss_legendre_two_point():
    rule = gauss_legendre_rule(1)
    assert rule.nodes == pytest.approx([-1 / np.sqrt(3), 1 / np.sqrt(3)])
    assert rule.weights == pytest.approx([1.0, 1.0])


@pytest.mark.parametrize("N", [1, 4, 9, 33])
def test_gauss_legendre_basics(N):
    rule = gauss_legendre_rule(N)
    assert rule.exactness_degree == 2 * N + 1
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(2.0, abs=1e-12)
    assert rule.integrate(rule.nodes**2) == pytest.approx(2.0 / 3.0, abs=1e-13)


@pytest.mark.parametrize("N", [4, 8, 16, 48])
def test_dispersive_rule_legendre_moments(N):
    rule = dispersive_rule(N)
    assert rule.exactness_degree == 2 * N - 2
    assert rule.endpoint_derivative_weight is not None
    table = legendre_table(2 * N - 2, rule.nodes)
    for n in range(1, 2 * N - 1):
        val = rule.integrate(table[0, n], legendre_endpoint(n, 1))
        assert abs(val) < 1e-11 * n
    assert rule.integrate(table[0, 0], 0.0) == pytest.approx(2.0, abs=1e-12)


def test_dispersive_monomial_moment():
    rule = dispersive_rule(8)  # degree 14 = 2N-2 boundary case
    val = rule.integrate(rule.nodes**14, derivative_at_right=14.0)
    assert val == pytest.approx(2.0 / 15.0, abs=1e-12)


def test_inner_product_constants():
    for rule in (gauss_legendre_rule(8), dispersive_rule(8)):
        ones = np.ones(rule.size)
        if rule.endpoint_derivative_weight is None:
            assert inner_product(rule, ones, ones) == pytest.approx(2.0)
        else:
            assert inner_product(rule, ones, ones, 0.0, 0.0) == pytest.approx(2.0)


def test_advection_inner_product_orthogonality():
    N = 8
    rule = gauss_legendre_rule(N)
    t = legendre_table(N, rule.nodes)
    for j in range(N + 1):
        for k in range(N + 1):
            expected = 2.0 / (2 * j + 1) if j == k else 0.0
            assert inner_product(rule, t[0, j], t[0, k]) == pytest.approx(
                expected, abs=1e-13
            )


def test_dispersive_inner_product_exact_window():
    N = 8
    rule = dispersive_rule(N)
    t = legendre_table(N, rule.nodes, nderiv=1)

    def ip(j, k):
        return inner_product(rule, t[0, j], t[0, k],
                             du_right=t[1, j, -1], dv_right=t[1, k, -1])

    assert ip(3, 4) == pytest.approx(0.0, abs=1e-13)
    assert ip(3, 3) == pytest.approx(2.0 / 7.0, abs=1e-13)
    # top exact pair: deg 2(N-1) = 2N-2
    assert ip(N - 1, N - 1) == pytest.approx(2.0 / (2 * N - 1), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=15), st.booleans())
def test_random_polynomial_exactness(coeffs, use_dispersive):
    # a rule must integrate any polynomial up to its exactness degree
    N = 8
    rule = dispersive_rule(N) if use_dispersive else gauss_legendre_rule(N)
    coeffs = np.asarray(coeffs)
    assert len(coeffs) - 1 <= rule.exactness_degree
    vals = np.polynomial.legendre.legval(rule.nodes, coeffs)
    deriv = np.polynomial.legendre.legval(
        1.0, np.polynomial.legendre.legder(coeffs)) if len(coeffs) > 1 else 0.0
    got = rule.integrate(vals, float(deriv))
    exact = 2.0 * coeffs[0]  # only L_0 has a nonzero integral
    assert got == pytest.approx(exact, abs=1e-10 * max(1.0, np.abs(coeffs).max()))


def test_quadrature_rule_validation():
    with pytest.raises(ValueError):
        QuadratureRule(nodes=np.array([0.5, -0.5]), weights=np.array([1.0, 1.0]),
                       exactness_degree=1)
    with pytest.raises(ValueError):
        QuadratureRule(nodes=np.array([-0.5, 0.5]), weights=np.array([1.0, 0.5]),
                       exactness_degree=1)
