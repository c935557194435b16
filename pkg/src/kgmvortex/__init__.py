"""Axisymmetric vortex solutions of the Klein-Gordon-Maxwell system.

The matter field ``u e^{i(k theta - omega t)}``, the electric potential
``phi = omega Phi_u`` and the magnetic potential ``b grad(theta)`` are
computed on a truncated (r, z) cylinder as critical points of a reduced
functional.
"""

__version__ = "0.1.0"

from .cylgrid import CylGrid, make_grid
from .functional import EnergyBreakdown, VortexState, grad_I, reduced_I, residuals, total_energy
from .gauss import solve_gauss
from .model import ModelParams, ParameterError, validate
from .solver import SolveReport, SolverOptions, descend, initial_guess, ray_scan, solve_vortex

__all__ = [
    "CylGrid", "make_grid", "EnergyBreakdown", "VortexState", "grad_I", "reduced_I",
    "residuals", "total_energy", "solve_gauss", "ModelParams", "ParameterError", "validate",
    "SolveReport", "SolverOptions", "descend", "initial_guess", "ray_scan", "solve_vortex",
]
