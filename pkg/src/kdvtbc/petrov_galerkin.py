"""Dual Petrov-Galerkin basis coefficients and the boundary-lift polynomial.

Trial functions phi_j = L_j + alpha_j L_{j+1} + beta_j L_{j+2} + gamma_j L_{j+3}
satisfy the three homogeneous transparent-boundary relations; the dual
functions psi_j satisfy the complementary relations that make the
integration-by-parts boundary terms of the dispersive operator vanish.

All polynomial algebra happens on the reference interval [-1, 1].  An
affine map x = ((b-a) y + (a+b)) / 2 carries a physical interval [a, b]
onto it, which scales first derivatives by s = (b-a)/2 and second
derivatives by s^2; kernel zero-values and advection constants enter the
boundary relations in that mapped form.
"""

from dataclasses import dataclass

import numpy as np

from .orthopoly import legendre_endpoint
from .ztbc import BoundaryKernels

__all__ = [
    "SingularBasisSystem",
    "SingularLiftSystem",
    "ReferenceBoundaryData",
    "map_boundary_data",
    "BasisCoeffs",
    "LiftPolynomial",
    "trial_coeffs",
    "dual_coeffs",
    "basis_coeffs",
    "lift_polynomial",
    "eval_basis",
]

_DET_GUARD = 1e-12


class SingularBasisSystem(ArithmeticError):
    """A 3x3 basis-coefficient system is numerically singular."""


class SingularLiftSystem(ArithmeticError):
    """The 3x3 lift-polynomial system is numerically singular."""


@dataclass(frozen=True)
class ReferenceBoundaryData:
    """Kernel zero-values and advection constants mapped to [-1, 1].

    With s = (b-a)/2, first-derivative data pick up one factor of s and
    second-derivative data s^2, so y1 = s Y1^0, y2 = s^2 Y2^0,
    y3 = s Y3^0, y4 = s^2 Y4^0, g_a = s^2 g(a), g_b = s^2 g(b).
    """

    y1: float
    y2: float
    y3: float
    y4: float
    g_a: float
    g_b: float
    scale: float


def map_boundary_data(kernels: BoundaryKernels, interval) -> ReferenceBoundaryData:
    a, b = interval
    s = 0.5 * (b - a)
    y10, y20, y30, y40 = kernels.zero_values()
    return ReferenceBoundaryData(
        y1=s * y10, y2=s * s * y20, y3=s * y30, y4=s * s * y40,
        g_a=s * s * kernels.g_a, g_b=s * s * kernels.g_b, scale=s,
    )


def _trial_condition(bd: ReferenceBoundaryData, n: int) -> np.ndarray:
    """The three homogeneous trial-space relations applied to L_n."""
    la, lb = legendre_endpoint, legendre_endpoint
    return np.array([
        la(n, 2, right=False) + bd.y1 * la(n, 1, right=False)
        + (bd.g_a + bd.y2) * la(n, 0, right=False),
        lb(n, 1) - bd.y3 * lb(n, 0),
        lb(n, 2) - bd.y4 * lb(n, 0),
    ])


def _dual_condition(bd: ReferenceBoundaryData, n: int) -> np.ndarray:
    """The three homogeneous dual-space relations applied to L_n."""
    le = legendre_endpoint
    return np.array([
        le(n, 2) - bd.y3 * le(n, 1) + (bd.g_b + bd.y4) * le(n, 0),
        le(n, 1, right=False) + bd.y1 * le(n, 0, right=False),
        le(n, 2, right=False) - bd.y2 * le(n, 0, right=False),
    ])


def _solve_3x3(A: np.ndarray, rhs: np.ndarray, exc: type, what: str) -> np.ndarray:
    det = np.linalg.det(A)
    norm = np.linalg.norm(A)
    if abs(det) < _DET_GUARD * norm**3:
        raise exc(f"{what}: |det| = {abs(det):.3e} below guard for norm {norm:.3e}")
    return np.linalg.solve(A, rhs)


def trial_coeffs(j: int, bd: ReferenceBoundaryData):
    """(alpha_j, beta_j, gamma_j) making phi_j satisfy the trial relations."""
    cond = [_trial_condition(bd, n) for n in range(j, j + 4)]
    A = np.column_stack(cond[1:])
    sol = _solve_3x3(A, -cond[0], SingularBasisSystem, f"trial basis j={j}")
    return tuple(sol)


def dual_coeffs(j: int, bd: ReferenceBoundaryData):
    """(alpha*_j, beta*_j, gamma*_j) for the dual function psi_j."""
    cond = [_dual_condition(bd, n) for n in range(j, j + 4)]
    A = np.column_stack(cond[1:])
    sol = _solve_3x3(A, -cond[0], SingularBasisSystem, f"dual basis j={j}")
    return tuple(sol)


@dataclass(frozen=True)
class BasisCoeffs:
    """Coefficient tables for the trial and dual bases, j = 0..N-3."""

    N: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    alpha_d: np.ndarray
    beta_d: np.ndarray
    gamma_d: np.ndarray
    boundary: ReferenceBoundaryData

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "alpha_d", "beta_d", "gamma_d"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_modes(self) -> int:
        return self.N - 2

    def _matrix(self, a, b, g) -> np.ndarray:
        m = np.zeros((self.N - 2, self.N + 1))
        idx = np.arange(self.N - 2)
        m[idx, idx] = 1.0
        m[idx, idx + 1] = a
        m[idx, idx + 2] = b
        m[idx, idx + 3] = g
        return m

    def trial_matrix(self) -> np.ndarray:
        """Rows are Legendre coefficients of phi_0..phi_{N-3}."""
        return self._matrix(self.alpha, self.beta, self.gamma)

    def dual_matrix(self) -> np.ndarray:
        """Rows are Legendre coefficients of psi_0..psi_{N-3}."""
        return self._matrix(self.alpha_d, self.beta_d, self.gamma_d)


def basis_coeffs(N: int, bd: ReferenceBoundaryData) -> BasisCoeffs:
    """Solve the coefficient systems for every basis index j = 0..N-3."""
    if N < 4:
        raise ValueError("need N >= 4")
    rows = [trial_coeffs(j, bd) for j in range(N - 2)]
    rows_d = [dual_coeffs(j, bd) for j in range(N - 2)]
    al, be, ga = map(np.array, zip(*rows))
    ald, bed, gad = map(np.array, zip(*rows_d))
    return BasisCoeffs(N=N, alpha=al, beta=be, gamma=ga,
                       alpha_d=ald, beta_d=bed, gamma_d=gad, boundary=bd)


def eval_basis(j: int, coeffs, y, derivative_order: int = 0):
    """Evaluate phi_j (or a derivative) at reference points y.

    ``coeffs`` is the (alpha_j, beta_j, gamma_j) triple.
    """
    if derivative_order not in (0, 1, 2, 3):
        raise ValueError("derivative_order must be in 0..3")
    from numpy.polynomial import legendre as npleg

    a, b, g = coeffs
    c = np.zeros(j + 4)
    c[j] = 1.0
    c[j + 1] = a
    c[j + 2] = b
    c[j + 3] = g
    if derivative_order:
        c = npleg.legder(c, derivative_order)
    return npleg.legval(np.asarray(y, dtype=float), c)


@dataclass(frozen=True)
class LiftPolynomial:
    """Degree-two polynomial absorbing the inhomogeneous boundary data.

    ``coeffs`` are monomial coefficients (c0, c1, c2) in the reference
    variable y; ``legendre`` the equivalent Legendre coefficients.
    """

    coeffs: np.ndarray
    legendre: np.ndarray

    def __post_init__(self):
        for name in ("coeffs", "legendre"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def c0(self) -> float:
        return float(self.coeffs[0])

    @property
    def c1(self) -> float:
        return float(self.coeffs[1])

    @property
    def c2(self) -> float:
        return float(self.coeffs[2])

    def __call__(self, y, derivative: int = 0):
        c0, c1, c2 = self.coeffs
        y = np.asarray(y, dtype=float)
        if derivative == 0:
            return c0 + y * (c1 + y * c2)
        if derivative == 1:
            return c1 + 2.0 * c2 * y
        if derivative == 2:
            return np.full_like(y, 2.0 * c2)
        return np.zeros_like(y)

    @classmethod
    def zero(cls) -> "LiftPolynomial":
        return cls(coeffs=np.zeros(3), legendre=np.zeros(3))


def _lift_matrix(bd: ReferenceBoundaryData) -> np.ndarray:
    # rows: the three boundary relations applied to 1, y, y^2
    return np.array([
        [bd.g_a + bd.y2, bd.y1 - (bd.g_a + bd.y2), 2.0 - 2.0 * bd.y1 + bd.g_a + bd.y2],
        [-bd.y3, 1.0 - bd.y3, 2.0 - bd.y3],
        [-bd.y4, -bd.y4, 2.0 - bd.y4],
    ])


def lift_polynomial(h1: float, h2: float, h3: float,
                    bd: ReferenceBoundaryData) -> LiftPolynomial:
    """Unique degree-two polynomial reproducing the boundary data h1..h3.

    The h values are in physical units; they are mapped with the same
    scale factors as the boundary relations (s^2, s, s^2).
    """
    s = bd.scale
    rhs = np.array([s * s * h1, s * h2, s * s * h3])
    A = _lift_matrix(bd)
    c = _solve_3x3(A, rhs, SingularLiftSystem, "lift polynomial")
    # monomial -> Legendre: 1 = L0, y = L1, y^2 = (2 L2 + L0)/3
    leg = np.array([c[0] + c[2] / 3.0, c[1], 2.0 * c[2] / 3.0])
    return LiftPolynomial(coeffs=c, legendre=leg)
