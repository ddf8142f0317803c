"""Direct discrete Legendre transform pair and physical-space advection.

The transform maps Legendre coefficients to values at the Gauss nodes and
back; both directions are plain O(N^2) matrix products, which at the
degrees used here beats any asymptotically fast alternative.
"""

import functools
from dataclasses import dataclass

import numpy as np

from .assembly import BandedLU, BandedMatrix
from .orthopoly import gauss_legendre_rule, legendre_table

__all__ = ["TransformPlan", "make_plan", "dlt", "idlt", "apply_gstar_dx"]


@dataclass(frozen=True)
class TransformPlan:
    """Precomputed node/weight/evaluation tables for degree N."""

    N: int
    nodes: np.ndarray
    weights: np.ndarray
    table: np.ndarray  # table[n, k] = L_n(y_k)

    def __post_init__(self):
        for name in ("nodes", "weights", "table"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@functools.lru_cache(maxsize=None)
def make_plan(N: int) -> TransformPlan:
    rule = gauss_legendre_rule(N)
    table = legendre_table(N, rule.nodes)[0]
    return TransformPlan(N=N, nodes=rule.nodes, weights=rule.weights, table=table)


def dlt(plan: TransformPlan, coeffs: np.ndarray) -> np.ndarray:
    """Nodal values u(y_k) from Legendre coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (plan.N + 1,):
        raise ValueError(f"expected {plan.N + 1} coefficients")
    return coeffs @ plan.table


def idlt(plan: TransformPlan, values: np.ndarray) -> np.ndarray:
    """Legendre coefficients from nodal values (inverse of dlt)."""
    values = np.asarray(values, dtype=float)
    if values.shape != (plan.N + 1,):
        raise ValueError(f"expected {plan.N + 1} nodal values")
    scale = np.arange(plan.N + 1) + 0.5
    return scale * (plan.table @ (plan.weights * values))


def apply_gstar_dx(plan: TransformPlan, diff_pair: tuple[BandedMatrix, BandedMatrix],
                   g_star_at_nodes: np.ndarray, coeffs: np.ndarray,
                   deriv_scale: float = 1.0) -> np.ndarray:
    """Coefficients of the L2 projection of g* du/dx from those of u.

    The derivative coefficients come from the banded pair (solve
    G^T d = F^T u), values move to the nodes, are multiplied pointwise by
    the g* samples, and return to coefficient space.  ``deriv_scale``
    converts the reference derivative to the physical one (1/s for an
    interval of half-width s).
    """
    F, G = diff_pair
    rhs = F.rmatvec(np.asarray(coeffs, dtype=float))
    d = BandedLU(G.T).solve(rhs)
    values = g_star_at_nodes * deriv_scale * dlt(plan, d)
    return idlt(plan, values)
