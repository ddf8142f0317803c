import numpy as np
import pytest

from kdvtbc.orthopoly import gauss_legendre_rule, legendre_endpoint, legendre_table
from kdvtbc.petrov_galerkin import (
    LiftPolynomial,
    ReferenceBoundaryData,
    SingularBasisSystem,
    basis_coeffs,
    dual_coeffs,
    eval_basis,
    lift_polynomial,
    map_boundary_data,
    trial_coeffs,
)
from kdvtbc.ztbc import compute_kernels

INTERVAL = (-6.0, 6.0)


@pytest.fixture(scope="module")
def example1_boundary():
    kb = compute_kernels(6.0, 6.0, 2.0**-12, 64)
    return map_boundary_data(kb, INTERVAL)


@pytest.fixture(scope="module")
def example2_boundary():
    kb = compute_kernels(1.0, 5.0, 2.0**-12, 64)
    return map_boundary_data(kb, INTERVAL)


def _boundary_residuals(bd, N, coeff_matrix, dual=False):
    table = legendre_table(N, np.array([-1.0, 1.0]), nderiv=2)
    vals = {d: coeff_matrix @ table[d] for d in range(3)}
    if not dual:
        r1 = vals[2][:, 0] + bd.y1 * vals[1][:, 0] + (bd.g_a + bd.y2) * vals[0][:, 0]
        r2 = vals[1][:, 1] - bd.y3 * vals[0][:, 1]
        r3 = vals[2][:, 1] - bd.y4 * vals[0][:, 1]
    else:
        r1 = vals[2][:, 1] - bd.y3 * vals[1][:, 1] + (bd.g_b + bd.y4) * vals[0][:, 1]
        r2 = vals[1][:, 0] + bd.y1 * vals[0][:, 0]
        r3 = vals[2][:, 0] - bd.y2 * vals[0][:, 0]
    return np.stack([r1, r2, r3])


def _coefficient_scale(bd, N):
    j = np.arange(N - 2)
    return max(1.0, abs(bd.g_a) + abs(bd.y2), float(((j + 2) * (j + 3) * (j + 4) * (j + 5)).max()) / 8)


def test_trial_basis_satisfies_boundary_relations(example1_boundary):
    bd = example1_boundary
    N = 16
    bc = basis_coeffs(N, bd)
    res = _boundary_residuals(bd, N, bc.trial_matrix())
    assert np.max(np.abs(res)) < 1e-9 * _coefficient_scale(bd, N)


def test_dual_basis_satisfies_boundary_relations(example1_boundary):
    bd = example1_boundary
    N = 16
    bc = basis_coeffs(N, bd)
    res = _boundary_residuals(bd, N, bc.dual_matrix(), dual=True)
    assert np.max(np.abs(res)) < 1e-9 * _coefficient_scale(bd, N)


def test_boundary_residuals_at_large_degree(example1_boundary):
    bd = example1_boundary
    N = 48
    bc = basis_coeffs(N, bd)
    scale = _coefficient_scale(bd, N)
    for matrix, dual in ((bc.trial_matrix(), False), (bc.dual_matrix(), True)):
        res = _boundary_residuals(bd, N, matrix, dual=dual)
        assert np.max(np.abs(res)) / scale < 1e-8


def test_zero_kernel_case_against_cramer():
    # all Y^0 = 0, g_a = 0: pure endpoint-derivative arithmetic
    bd = ReferenceBoundaryData(y1=0.0, y2=0.0, y3=0.0, y4=0.0,
                               g_a=0.0, g_b=0.0, scale=1.0)
    j = 0
    got = np.array(trial_coeffs(j, bd))

    def cond(n):
        return np.array([
            legendre_endpoint(n, 2, right=False),
            legendre_endpoint(n, 1),
            legendre_endpoint(n, 2),
        ])

    A = np.column_stack([cond(j + 1), cond(j + 2), cond(j + 3)])
    b = -cond(j)
    # Cramer's rule as the independent 3x3 solve
    det = np.linalg.det(A)
    oracle = np.array([np.linalg.det(np.column_stack(
        [b if c == i else A[:, c] for c in range(3)])) / det for i in range(3)])
    assert got == pytest.approx(oracle, rel=1e-12)


def test_pochhammer_factors_match_recurrence():
    # (j)_2/2 and (j-1)_4/8 in the boundary systems are endpoint derivatives
    table = legendre_table(20, np.array([1.0]), nderiv=2)
    for j in range(21):
        assert table[1, j, 0] == pytest.approx(j * (j + 1) / 2, rel=1e-12, abs=1e-12)
        assert table[2, j, 0] == pytest.approx(
            (j - 1) * j * (j + 1) * (j + 2) / 8, rel=1e-12, abs=1e-12
        )


def _duality_gap(bd, bc, N, p_line, k, j):
    s = bd.scale
    P0, P1 = p_line
    rule = gauss_legendre_rule(N + 4)
    t = legendre_table(N, rule.nodes, nderiv=3)
    pg = P0 + P1 * rule.nodes
    Cphi, Cpsi = bc.trial_matrix(), bc.dual_matrix()
    phi, dphi, d3phi = Cphi[k] @ t[0], Cphi[k] @ t[1], Cphi[k] @ t[3]
    psi, dpsi, d3psi = Cpsi[j] @ t[0], Cpsi[j] @ t[1], Cpsi[j] @ t[3]
    lhs = rule.weights @ ((pg * dphi / s + d3phi / s**3) * psi)
    rhs = -rule.weights @ (phi * ((P1 * psi + pg * dpsi) / s + d3psi / s**3))
    return lhs, rhs


def test_duality_identity_example2(example2_boundary):
    bd = example2_boundary
    N = 16
    bc = basis_coeffs(N, bd)
    p_line = (3.0, 2.0)  # endpoint line of g = -x^3/54 + x + 3 in reference form
    lhs, rhs = _duality_gap(bd, bc, N, p_line, 2, 5)
    assert lhs == pytest.approx(rhs, abs=1e-8)
    rng = np.random.default_rng(3)
    for _ in range(6):
        k, j = rng.integers(0, N - 2, size=2)
        lhs, rhs = _duality_gap(bd, bc, N, p_line, int(k), int(j))
        assert lhs == pytest.approx(rhs, abs=1e-8 * max(1.0, abs(lhs)))


def test_integration_by_parts_boundary_terms_vanish(example1_boundary):
    bd = example1_boundary
    N = 12
    bc = basis_coeffs(N, bd)
    s = bd.scale
    g_ends = (bd.g_a / s**2, bd.g_b / s**2)  # physical endpoint values of p_g
    table = legendre_table(N, np.array([-1.0, 1.0]), nderiv=2)
    Cphi, Cpsi = bc.trial_matrix(), bc.dual_matrix()
    rng = np.random.default_rng(5)
    for _ in range(5):
        k, j = rng.integers(0, N - 2, size=2)
        for col, gval in ((0, g_ends[0]), (1, g_ends[1])):
            phi = Cphi[k] @ table[0, :, col]
            dphi = Cphi[k] @ table[1, :, col]
            d2phi = Cphi[k] @ table[2, :, col]
            psi = Cpsi[j] @ table[0, :, col]
            dpsi = Cpsi[j] @ table[1, :, col]
            d2psi = Cpsi[j] @ table[2, :, col]
            term = (s**2 * gval * phi * psi + d2phi * psi - dphi * dpsi
                    + phi * d2psi)
            scale = max(1.0, abs(d2phi * psi), abs(dphi * dpsi))
            assert abs(term) < 1e-8 * scale


def test_lift_zero_data(example1_boundary):
    lp = lift_polynomial(0.0, 0.0, 0.0, example1_boundary)
    assert np.all(lp.coeffs == 0.0)
    assert np.all(lp.legendre == 0.0)


def test_lift_reproduces_boundary_data(example1_boundary):
    bd = example1_boundary
    rng = np.random.default_rng(11)
    h = rng.standard_normal(3)
    lp = lift_polynomial(*h, bd)
    s = bd.scale
    r1 = lp(-1.0, 2) + bd.y1 * lp(-1.0, 1) + (bd.g_a + bd.y2) * lp(-1.0) - s * s * h[0]
    r2 = lp(1.0, 1) - bd.y3 * lp(1.0) - s * h[1]
    r3 = lp(1.0, 2) - bd.y4 * lp(1.0) - s * s * h[2]
    scale = max(1.0, float(np.abs(h).max()))
    assert max(abs(r1), abs(r2), abs(r3)) < 1e-10 * scale * s * s


def test_lift_against_cramer(example1_boundary):
    bd = example1_boundary
    rng = np.random.default_rng(2)
    h = rng.standard_normal(3)
    lp = lift_polynomial(*h, bd)
    s = bd.scale
    A = np.array([
        [bd.g_a + bd.y2, bd.y1 - (bd.g_a + bd.y2), 2 - 2 * bd.y1 + bd.g_a + bd.y2],
        [-bd.y3, 1 - bd.y3, 2 - bd.y3],
        [-bd.y4, -bd.y4, 2 - bd.y4],
    ])
    rhs = np.array([s * s * h[0], s * h[1], s * s * h[2]])
    det = np.linalg.det(A)
    oracle = np.array([np.linalg.det(np.column_stack(
        [rhs if c == i else A[:, c] for c in range(3)])) / det for i in range(3)])
    assert lp.coeffs == pytest.approx(oracle, rel=1e-9)
    # Legendre conversion: y^2 = (2 L2 + L0) / 3
    assert lp.legendre == pytest.approx(
        [oracle[0] + oracle[2] / 3, oracle[1], 2 * oracle[2] / 3], rel=1e-9
    )


def test_eval_basis_reduces_to_legendre():
    x = np.linspace(-1, 1, 7)
    got = eval_basis(4, (0.0, 0.0, 0.0), x)
    expected = legendre_table(4, x)[0, 4]
    assert got == pytest.approx(expected, abs=1e-14)


def test_eval_basis_degree(example1_boundary):
    bc = basis_coeffs(10, example1_boundary)
    j = 3
    coeffs = (bc.alpha[j], bc.beta[j], bc.gamma[j])
    assert bc.gamma[j] != 0.0
    # leading Legendre coefficient of degree j+3 is gamma_j
    vals = eval_basis(j, coeffs, gauss_legendre_rule(10).nodes)
    fit = np.polynomial.legendre.legfit(gauss_legendre_rule(10).nodes, vals, j + 3)
    assert fit[j + 3] == pytest.approx(bc.gamma[j], rel=1e-10)


def test_eval_basis_third_derivative_against_fd(example1_boundary):
    bc = basis_coeffs(12, example1_boundary)
    j = 2
    coeffs = (bc.alpha[j], bc.beta[j], bc.gamma[j])
    x0 = 0.3

    def fd(h):
        vals = eval_basis(j, coeffs, np.array([-2, -1, 1, 2]) * h + x0)
        return (vals[3] - 2 * vals[2] + 2 * vals[1] - vals[0]) / (2 * h**3)

    richardson = (4 * fd(5e-3) - fd(1e-2)) / 3  # O(h^4) extrapolation
    exact = eval_basis(j, coeffs, x0, derivative_order=3)
    assert richardson == pytest.approx(exact, rel=1e-6)


def test_gram_diagonal_nonzero(example1_boundary):
    from kdvtbc.assembly import mass_dispersive
    from kdvtbc.orthopoly import dispersive_rule

    N = 16
    bc = basis_coeffs(N, example1_boundary)
    M = mass_dispersive(N, bc, dispersive_rule(N))
    diag = np.array([M[k, k] for k in range(N - 2)])
    assert np.all(np.abs(diag) > 1e-6)


def test_coefficient_sensitivity_to_kernel_value(example1_boundary):
    # finite-difference sensitivity w.r.t. Y1^0 vs the solve of the
    # analytically differentiated system
    bd = example1_boundary
    j, eps = 4, 1e-6 * abs(example1_boundary.y1)

    def solve(y1):
        b = ReferenceBoundaryData(y1=y1, y2=bd.y2, y3=bd.y3, y4=bd.y4,
                                  g_a=bd.g_a, g_b=bd.g_b, scale=bd.scale)
        return np.array(trial_coeffs(j, b))

    fd = (solve(bd.y1 + eps) - solve(bd.y1 - eps)) / (2 * eps)

    def cond(bdx, n):
        return np.array([
            legendre_endpoint(n, 2, right=False) + bdx.y1 * legendre_endpoint(n, 1, right=False)
            + (bdx.g_a + bdx.y2) * legendre_endpoint(n, 0, right=False),
            legendre_endpoint(n, 1) - bdx.y3 * legendre_endpoint(n, 0),
            legendre_endpoint(n, 2) - bdx.y4 * legendre_endpoint(n, 0),
        ])

    A = np.column_stack([cond(bd, n) for n in range(j + 1, j + 4)])
    coeffs = solve(bd.y1)
    # dA/dY1 and db/dY1 rows: only the first relation depends on Y1
    dA = np.zeros((3, 3))
    for c, n in enumerate(range(j + 1, j + 4)):
        dA[0, c] = legendre_endpoint(n, 1, right=False)
    db = -np.array([legendre_endpoint(j, 1, right=False), 0.0, 0.0])
    analytic = np.linalg.solve(A, db - dA @ coeffs)
    assert fd == pytest.approx(analytic, rel=1e-6)


def test_singular_basis_system_guard():
    bd = ReferenceBoundaryData(y1=0.0, y2=0.0, y3=3.0, y4=0.0,
                               g_a=0.0, g_b=0.0, scale=1.0)
    # forcing a singular second/third relation pair: y4 = 0 and y3 tuned so
    # rows become linearly dependent is hard to arrange exactly; instead
    # check that the guard machinery raises on an exactly singular matrix
    from kdvtbc.petrov_galerkin import _solve_3x3

    with pytest.raises(SingularBasisSystem):
        _solve_3x3(np.ones((3, 3)), np.ones(3), SingularBasisSystem, "test")


def test_lift_polynomial_zero_class():
    lp = LiftPolynomial.zero()
    assert lp(0.3) == 0.0
    assert lp.c0 == lp.c1 == lp.c2 == 0.0
