"""Galerkin matrices in banded storage, with executable bandwidth checks.

Every bandwidth claim is enforced while converting a densely assembled
matrix into band storage: entries outside the declared band must vanish
to roundoff or a BandwidthViolation is raised.

One deliberate departure from the nominal 4-diagonal shape: the
dispersive-side transition matrix picks up a single quadrature-borne
entry at (N, N-4), because its corner entries must be evaluated with the
dispersive inner product, which is not exact at degree 2N-1.  It is
therefore stored with lower bandwidth 4.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .orthopoly import QuadratureRule, legendre_table
from .petrov_galerkin import BasisCoeffs

__all__ = [
    "BandedMatrix",
    "BandedLU",
    "BandwidthViolation",
    "mass_dispersive",
    "stiffness_dispersive",
    "mass_advection",
    "stiffness_advection",
    "transition_matrices",
    "differentiation_pair",
]

_BAND_TOL = 1e-10


class BandwidthViolation(ArithmeticError):
    """An assembled matrix has significant entries outside its declared band."""


@dataclass(frozen=True)
class BandedMatrix:
    """Real matrix stored by diagonals (LAPACK band layout).

    ``data[upper + i - j, j]`` holds entry (i, j); accessing outside the
    band yields exactly zero.
    """

    n_rows: int
    n_cols: int
    lower_bw: int
    upper_bw: int
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=float)
        if data.shape != (self.lower_bw + self.upper_bw + 1, self.n_cols):
            raise ValueError("band storage has wrong shape")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_dense(cls, dense: np.ndarray, lower_bw: int, upper_bw: int,
                   tol: float = _BAND_TOL) -> "BandedMatrix":
        """Band-compress ``dense``, asserting the declared bandwidths."""
        dense = np.asarray(dense, dtype=float)
        n, m = dense.shape
        i, j = np.indices(dense.shape)
        outside = (i - j > lower_bw) | (j - i > upper_bw)
        scale = float(np.max(np.abs(dense))) if dense.size else 0.0
        if np.any(np.abs(dense[outside]) > tol * scale):
            worst = np.max(np.abs(dense[outside]))
            raise BandwidthViolation(
                f"entry {worst:.3e} outside band ({lower_bw},{upper_bw}) "
                f"exceeds {tol:.1e} * {scale:.3e}"
            )
        data = np.zeros((lower_bw + upper_bw + 1, m))
        for d in range(-lower_bw, upper_bw + 1):
            diag = np.diagonal(dense, offset=d)
            js = np.arange(max(d, 0), max(d, 0) + diag.size)
            data[upper_bw - d, js] = diag
        return cls(n_rows=n, n_cols=m, lower_bw=lower_bw, upper_bw=upper_bw,
                   data=data)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        for d in range(-self.lower_bw, self.upper_bw + 1):
            js = np.arange(max(d, 0), self.n_cols)
            js = js[(js - d >= 0) & (js - d < self.n_rows)]
            out[js - d, js] = self.data[self.upper_bw - d, js]
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def __getitem__(self, key) -> float:
        i, j = key
        if not (0 <= i < self.n_rows and 0 <= j < self.n_cols):
            raise IndexError(key)
        if i - j > self.lower_bw or j - i > self.upper_bw:
            return 0.0
        return float(self.data[self.upper_bw + i - j, j])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_cols,):
            raise ValueError("vector length mismatch")
        out = np.zeros(self.n_rows)
        for d in range(-self.lower_bw, self.upper_bw + 1):
            js = np.arange(max(d, 0), self.n_cols)
            js = js[(js - d >= 0) & (js - d < self.n_rows)]
            out[js - d] += self.data[self.upper_bw - d, js] * x[js]
        return out

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        """Transposed product A^T x."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_rows,):
            raise ValueError("vector length mismatch")
        out = np.zeros(self.n_cols)
        for d in range(-self.lower_bw, self.upper_bw + 1):
            js = np.arange(max(d, 0), self.n_cols)
            js = js[(js - d >= 0) & (js - d < self.n_rows)]
            out[js] += self.data[self.upper_bw - d, js] * x[js - d]
        return out

    def transpose(self) -> "BandedMatrix":
        return BandedMatrix.from_dense(self.to_dense().T, self.upper_bw,
                                       self.lower_bw, tol=np.inf)

    @property
    def T(self) -> "BandedMatrix":
        return self.transpose()

    def scaled_sum(self, other: "BandedMatrix", factor: float) -> "BandedMatrix":
        """self + factor * other, widened to the union band."""
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        lo = max(self.lower_bw, other.lower_bw)
        up = max(self.upper_bw, other.upper_bw)
        return BandedMatrix.from_dense(
            self.to_dense() + factor * other.to_dense(), lo, up, tol=np.inf
        )


class BandedLU:
    """LU factorization of a square banded matrix (LAPACK gbtrf/gbtrs).

    Partial pivoting; factor once, solve many times.
    """

    def __init__(self, matrix: BandedMatrix):
        if matrix.n_rows != matrix.n_cols:
            raise ValueError("only square matrices can be factored")
        self.n = matrix.n_rows
        self.kl = matrix.lower_bw
        self.ku = matrix.upper_bw
        ab = np.zeros((2 * self.kl + self.ku + 1, self.n), order="F")
        ab[self.kl :, :] = matrix.data
        lu, piv, info = lapack.dgbtrf(ab, self.kl, self.ku)
        if info != 0:
            raise ArithmeticError(f"banded LU failed with info={info}")
        self._lu = lu
        self._piv = piv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x, info = lapack.dgbtrs(self._lu, self.kl, self.ku, rhs, self._piv)
        if info != 0:
            raise ArithmeticError(f"banded solve failed with info={info}")
        return x


def _dispersive_gram(rule: QuadratureRule, left_vals, left_dr, right_vals, right_dr):
    """Gram matrix of two function families under the dispersive product.

    ``left_vals``/``right_vals`` hold nodal values row-wise; ``*_dr`` the
    derivatives at y = +1.
    """
    w = rule.weights
    out = (left_vals * w) @ right_vals.T
    wp = rule.endpoint_derivative_weight
    out += wp * (np.outer(left_dr, right_vals[:, -1])
                 + np.outer(left_vals[:, -1], right_dr))
    return out


def mass_dispersive(N: int, basis: BasisCoeffs, rule: QuadratureRule) -> BandedMatrix:
    """M^d_{kj} = <phi_k, psi_j>_d, 7-diagonal, (N-2) x (N-2)."""
    t = legendre_table(N, rule.nodes, nderiv=1)
    Cphi, Cpsi = basis.trial_matrix(), basis.dual_matrix()
    phi, psi = Cphi @ t[0], Cpsi @ t[0]
    dphi_r, dpsi_r = Cphi @ t[1][:, -1], Cpsi @ t[1][:, -1]
    dense = _dispersive_gram(rule, phi, dphi_r, psi, dpsi_r)
    return BandedMatrix.from_dense(dense, 3, 3)


def stiffness_dispersive(N: int, basis: BasisCoeffs, rule: QuadratureRule,
                         p_line: tuple[float, float], scale: float) -> BandedMatrix:
    """S^d_{kj} = <p_g d/dx phi_k + d^3/dx^3 phi_k, psi_j>_d, 7-diagonal.

    ``p_line`` holds (P0, P1) with p_g(y) = P0 + P1 y in physical units on
    the reference variable; ``scale`` is s = (b-a)/2, so d/dx = (1/s) d/dy.
    """
    t = legendre_table(N, rule.nodes, nderiv=4)
    Cphi, Cpsi = basis.trial_matrix(), basis.dual_matrix()
    P0, P1 = p_line
    pg = P0 + P1 * rule.nodes
    dphi, d2phi, d3phi, d4phi = (Cphi @ t[d] for d in (1, 2, 3, 4))
    op = pg * dphi / scale + d3phi / scale**3
    # d/dy of the operator image, needed at y = +1 for the derivative weight
    dop_r = ((P1 * dphi[:, -1] + pg[-1] * d2phi[:, -1]) / scale
             + d4phi[:, -1] / scale**3)
    psi = Cpsi @ t[0]
    dpsi_r = Cpsi @ t[1][:, -1]
    dense = _dispersive_gram(rule, op, dop_r, psi, dpsi_r)
    return BandedMatrix.from_dense(dense, 3, 3)


def mass_advection(N: int) -> BandedMatrix:
    """Diagonal advection mass matrix with entries 2/(2k+1)."""
    diag = 2.0 / (2.0 * np.arange(N + 1) + 1.0)
    return BandedMatrix(n_rows=N + 1, n_cols=N + 1, lower_bw=0, upper_bw=0,
                        data=diag[None, :])


def stiffness_advection(N: int, gstar_nodes: np.ndarray, rule: QuadratureRule,
                        scale: float, declared_degree: int | None = None):
    """S^a_{kj} = <g* d/dx phi_k, psi_j>_a on the Gauss nodes.

    For g* declared polynomial of degree n the matrix is banded with
    bandwidth at most 2n and returned as a BandedMatrix; otherwise the
    dense array is returned.
    """
    gstar_nodes = np.asarray(gstar_nodes, dtype=float)
    if gstar_nodes.shape != rule.nodes.shape:
        raise ValueError("g* samples must match the rule nodes")
    t = legendre_table(N, rule.nodes, nderiv=1)
    weighted = rule.weights * gstar_nodes / scale
    dense = (t[1] * weighted) @ t[0].T
    if declared_degree is None:
        return dense
    n = declared_degree
    return BandedMatrix.from_dense(dense, n, max(n - 1, 0))


def transition_matrices(N: int, basis: BasisCoeffs, disp_rule: QuadratureRule,
                        adv_rule: QuadratureRule) -> tuple[BandedMatrix, BandedMatrix]:
    """(M^da, M^ad): couplings between the dispersive and advection bases.

    M^da_{kj} = <phi_k, psi^a_j>_a is strictly 4-diagonal (all entries sit
    inside the advection rule's exactness window).  M^ad_{kj} =
    <phi^a_k, psi_j>_d carries the extra (N, N-4) corner described in the
    module docstring and is stored with lower bandwidth 4.
    """
    Cphi, Cpsi = basis.trial_matrix(), basis.dual_matrix()

    ta = legendre_table(N, adv_rule.nodes)
    phi_a = Cphi @ ta[0]
    m_da = (phi_a * adv_rule.weights) @ ta[0].T
    M_da = BandedMatrix.from_dense(m_da, 0, 3)

    td = legendre_table(N, disp_rule.nodes, nderiv=1)
    psi_d = Cpsi @ td[0]
    dpsi_r = Cpsi @ td[1][:, -1]
    m_ad = _dispersive_gram(disp_rule, td[0], td[1][:, -1], psi_d, dpsi_r)
    M_ad = BandedMatrix.from_dense(m_ad, 4, 0)
    return M_da, M_ad


def differentiation_pair(N: int, rule: QuadratureRule) -> tuple[BandedMatrix, BandedMatrix]:
    """Banded pair (F, G) linking coefficients of u and of du/dy.

    F_{kj} = <phi^a_k', psi^a_j - psi^a_{j+2}>_a and
    G_{kj} = <phi^a_k, psi^a_j - psi^a_{j+2}>_a; the shifted test function
    is dropped once j+2 exceeds N, where its exact contribution vanishes.
    Solving G^T d = F^T u yields the derivative coefficients d.
    """
    t = legendre_table(N, rule.nodes, nderiv=1)
    test = t[0].copy()
    test[: N - 1] -= t[0][2:]
    F = (t[1] * rule.weights) @ test.T
    G = (t[0] * rule.weights) @ test.T
    return (BandedMatrix.from_dense(F, 1, 0),
            BandedMatrix.from_dense(G, 2, 0))
