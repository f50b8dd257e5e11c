"""Propagators of the free particle (and a linear potential) computed three
ways: closed form, regulated momentum quadrature and time slicing, with
Hamilton-Jacobi and Schrödinger cross-checks."""

from .classical import BoundaryData, LinearPotentialSpec, classical_action_free, classical_action_linear
from .core import PhysicsConfig, SpatialGrid, Wavefunction, build_grid, centered_grid, gaussian_packet, norm
from .evolve import evolve_wavefunction, packet_width, schrodinger_residual
from .kernels import FREE, KernelSpec, free_kernel, kernel, linear_potential_kernel
from .lattice import SliceConfig, sliced_propagator
from .quadrature import GaussianForm, gaussian_closed_form, momentum_kernel_integral
from .report import ResidualReport

__version__ = "0.1.0"

__all__ = [
    "BoundaryData", "LinearPotentialSpec", "classical_action_free", "classical_action_linear",
    "PhysicsConfig", "SpatialGrid", "Wavefunction", "build_grid", "centered_grid",
    "gaussian_packet", "norm", "evolve_wavefunction", "packet_width", "schrodinger_residual",
    "FREE", "KernelSpec", "free_kernel", "kernel", "linear_potential_kernel",
    "SliceConfig", "sliced_propagator", "GaussianForm", "gaussian_closed_form",
    "momentum_kernel_integral", "ResidualReport",
]
