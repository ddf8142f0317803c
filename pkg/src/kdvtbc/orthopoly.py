"""Legendre/Jacobi polynomials and the quadrature rules behind all inner products.

Two rules are provided on [-1, 1]:

* the plain (N+1)-point Gauss-Legendre rule, exact through degree 2N+1,
  used for the advection inner product;
* a generalized Gauss rule with interior nodes at the roots of the Jacobi
  polynomial P^(2,1)_{N-2}, both endpoints as nodes and one derivative
  weight at +1, exact through degree 2N-2, used for the dispersive inner
  product.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import eval_jacobi

__all__ = [
    "QuadratureRule",
    "legendre_eval",
    "legendre_table",
    "legendre_endpoint",
    "jacobi_roots",
    "gauss_legendre_rule",
    "dispersive_rule",
    "inner_product",
]


def legendre_table(nmax: int, y, nderiv: int = 0) -> np.ndarray:
    """Values of L_0..L_nmax and derivatives up to order nderiv at points y.

    Returns an array of shape (nderiv+1, nmax+1, len(y)) filled via the
    three-term recurrence, differentiated Leibniz-style for derivatives.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros((nderiv + 1, nmax + 1, y.size))
    out[0, 0] = 1.0
    if nmax >= 1:
        out[0, 1] = y
        if nderiv >= 1:
            out[1, 1] = 1.0
    for n in range(1, nmax):
        out[0, n + 1] = ((2 * n + 1) * y * out[0, n] - n * out[0, n - 1]) / (n + 1)
        for d in range(1, nderiv + 1):
            out[d, n + 1] = (
                (2 * n + 1) * (y * out[d, n] + d * out[d - 1, n]) - n * out[d, n - 1]
            ) / (n + 1)
    return out


def legendre_eval(n: int, x, derivative: int = 0):
    """Evaluate L_n (or one of its derivatives) at x via the recurrence."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    scalar = np.isscalar(x)
    table = legendre_table(n, x, nderiv=derivative)
    vals = table[derivative, n]
    return float(vals[0]) if scalar else vals


def legendre_endpoint(n: int, derivative: int = 0, right: bool = True) -> float:
    """Closed-form L_n^(d)(+-1) = (+-1)^(n-d) (n+d)! / (2^d d! (n-d)!)."""
    d = derivative
    if n < d:
        return 0.0
    val = 1.0
    for i in range(n - d + 1, n + d + 1):
        val *= i
    val /= 2.0**d * math.factorial(d)
    if not right and (n - d) % 2:
        val = -val
    return val


@dataclass(frozen=True)
class QuadratureRule:
    """Immutable quadrature rule on [-1, 1].

    ``endpoint_derivative_weight`` is the extra weight multiplying
    d/dy(u v) at y = +1; it is present only for the dispersive rule.
    """

    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    endpoint_derivative_weight: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape:
            raise ValueError("nodes and weights must have equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] < -1.0 - 1e-14 or nodes[-1] > 1.0 + 1e-14:
            raise ValueError("nodes must lie in [-1, 1]")
        if abs(weights.sum() - 2.0) > 1e-12:
            raise ValueError("weights must sum to 2")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, values, derivative_at_right: float = 0.0) -> float:
        """Apply the rule to a function given by its nodal values.

        ``derivative_at_right`` feeds the derivative weight; it is ignored
        for rules without one.
        """
        total = float(np.dot(self.weights, values))
        if self.endpoint_derivative_weight is not None:
            total += self.endpoint_derivative_weight * derivative_at_right
        return total


def _jacobi_recurrence(alpha: float, beta: float, n: int):
    """Diagonal and off-diagonal of the n x n symmetric Jacobi matrix."""
    k = np.arange(n, dtype=float)
    ab = alpha + beta
    diag = np.empty(n)
    diag[0] = (beta - alpha) / (ab + 2.0)
    if n > 1:
        kk = k[1:]
        diag[1:] = (beta**2 - alpha**2) / ((2 * kk + ab) * (2 * kk + ab + 2.0))
    off = np.empty(max(n - 1, 0))
    if n > 1:
        off[0] = math.sqrt(
            4.0 * (1 + alpha) * (1 + beta) / ((2 + ab) ** 2 * (3 + ab))
        )
    if n > 2:
        kk = k[2:]
        num = 4.0 * kk * (kk + alpha) * (kk + beta) * (kk + ab)
        den = (2 * kk + ab) ** 2 * (2 * kk + ab + 1.0) * (2 * kk + ab - 1.0)
        off[1:] = np.sqrt(num / den)
    return diag, off


def jacobi_roots(alpha: float, beta: float, n: int, lapack_driver: str = "stemr") -> np.ndarray:
    """Roots of the Jacobi polynomial P^(alpha,beta)_n, strictly increasing.

    Computed as eigenvalues of the symmetric tridiagonal Golub-Welsch
    matrix, then validated by direct polynomial evaluation.
    """
    if alpha <= -1 or beta <= -1:
        raise ValueError("Jacobi parameters must exceed -1")
    if n < 1:
        raise ValueError("need n >= 1")
    diag, off = _jacobi_recurrence(alpha, beta, n)
    roots = eigh_tridiagonal(
        diag, off, eigvals_only=True, lapack_driver=lapack_driver
    )
    roots = np.sort(roots)
    # validate against an independent evaluation of P_n
    scale = np.max(np.abs(eval_jacobi(n, alpha, beta, np.linspace(-1, 1, 4 * n + 1))))
    residual = np.max(np.abs(eval_jacobi(n, alpha, beta, roots)))
    if residual > 1e-10 * scale:
        raise ArithmeticError(
            f"Jacobi root residual {residual:.3e} exceeds 1e-10 * {scale:.3e}"
        )
    return roots


def _golub_welsch(alpha: float, beta: float, n: int, mu0: float):
    diag, off = _jacobi_recurrence(alpha, beta, n)
    nodes, vecs = eigh_tridiagonal(diag, off)
    order = np.argsort(nodes)
    return nodes[order], mu0 * vecs[0, order] ** 2


@functools.lru_cache(maxsize=None)
def gauss_legendre_rule(N: int) -> QuadratureRule:
    """(N+1)-point Gauss-Legendre rule, exact through degree 2N+1."""
    if N < 1:
        raise ValueError("need N >= 1")
    nodes, weights = _golub_welsch(0.0, 0.0, N + 1, mu0=2.0)
    return QuadratureRule(nodes=nodes, weights=weights, exactness_degree=2 * N + 1)


@functools.lru_cache(maxsize=None)
def dispersive_rule(N: int) -> QuadratureRule:
    """Generalized Gauss rule for the dispersive inner product.

    Nodes are -1, the N-2 roots of P^(2,1)_{N-2} and +1; the N weights plus
    the derivative weight at +1 solve the square moment system that makes
    L_0..L_N integrate exactly.  The rule is then verified exact through
    degree 2N-2, its Gauss-type exactness.
    """
    if N < 4:
        raise ValueError("need N >= 4")
    interior = jacobi_roots(2.0, 1.0, N - 2)
    nodes = np.concatenate(([-1.0], interior, [1.0]))
    # moment system: rows n = 0..N, unknowns (w_1..w_N, w'_N)
    table = legendre_table(N, nodes)
    A = np.empty((N + 1, N + 1))
    A[:, :N] = table[0]
    A[:, N] = [legendre_endpoint(n, 1) for n in range(N + 1)]
    rhs = np.zeros(N + 1)
    rhs[0] = 2.0
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("dispersive moment system is singular") from exc
    weights, wprime = sol[:N], sol[N]
    rule = QuadratureRule(
        nodes=nodes,
        weights=weights,
        exactness_degree=2 * N - 2,
        endpoint_derivative_weight=wprime,
    )
    # post-verification: exact zero integrals through the full Gauss degree
    big = legendre_table(2 * N - 2, nodes, nderiv=1)
    vals = big[0] @ weights + wprime * np.array(
        [legendre_endpoint(n, 1) for n in range(2 * N - 1)]
    )
    vals[0] -= 2.0
    scale = np.abs(big[0]) @ np.abs(weights) + abs(wprime) * np.array(
        [abs(legendre_endpoint(n, 1)) for n in range(2 * N - 1)]
    )
    if np.max(np.abs(vals) / np.maximum(scale, 1.0)) > 1e-10:
        raise ArithmeticError(
            f"dispersive rule fails exactness check at N={N}: "
            f"max residual {np.max(np.abs(vals)):.3e}"
        )
    return rule


def inner_product(rule: QuadratureRule, u, v, du_right: float | None = None,
                  dv_right: float | None = None) -> float:
    """Discrete inner product of two functions given by nodal values.

    For a rule carrying a derivative weight the endpoint derivatives of
    both factors at y = +1 are required, since the weight multiplies
    d/dy(u v)|_1 = u'(1) v(1) + u(1) v'(1).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape != rule.nodes.shape:
        raise ValueError("value arrays must match the rule's nodes")
    total = float(np.dot(rule.weights, u * v))
    if rule.endpoint_derivative_weight is not None:
        if du_right is None or dv_right is None:
            raise ValueError("dispersive rule needs endpoint derivatives")
        total += rule.endpoint_derivative_weight * (
            du_right * v[-1] + u[-1] * dv_right
        )
    return total
