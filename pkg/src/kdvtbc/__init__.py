"""Spectral splitting solver for the linearized KdV equation on a finite
interval with discrete transparent boundary conditions.

The equation du/dt + g(x) du/dx + d^3u/dx^3 = 0 is integrated by a
second-order Peaceman-Rachford splitting built on the endpoint-line
decomposition of g, a dual Petrov-Galerkin Legendre discretization in
space, and boundary closures assembled from inverse Z-transform
convolution kernels so that waves leave the domain without reflection.
"""

__version__ = "0.1.0"

from .harness import (
    ExperimentConfig,
    error_norms,
    fourier_reference,
    parse_config,
    read_config,
    run_convergence,
    run_experiment,
    serialize_config,
    slope_diagnostics,
    table_error,
)
from .stepper import (
    AdvectionField,
    Discretization,
    SpectralState,
    initialize,
    reconstruct,
    run,
    step,
)
from .ztbc import BoundaryKernels, compute_kernels, load_kernels, save_kernels

__all__ = [
    "__version__",
    "AdvectionField",
    "BoundaryKernels",
    "Discretization",
    "ExperimentConfig",
    "SpectralState",
    "compute_kernels",
    "error_norms",
    "fourier_reference",
    "initialize",
    "load_kernels",
    "parse_config",
    "read_config",
    "reconstruct",
    "run",
    "run_convergence",
    "run_experiment",
    "save_kernels",
    "serialize_config",
    "slope_diagnostics",
    "step",
    "table_error",
]
