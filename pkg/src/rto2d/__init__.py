"""Robust topology optimization of hyperelastic structures in 2-D.

The package combines a total-Lagrangian plane-strain finite element model
with energy interpolation, a second-order perturbation treatment of load,
material and geometric uncertainty, adjoint design sensitivities and an MMA
driven optimization loop.
"""

from .errors import (ConfigurationError, DegenerateFieldError, GeometryError,
                     InadmissibleStateError, InvalidArgumentError, OracleUnreliableError,
                     RankDeficiencyError, RTOError, SolverFailure)
from .mesh import Mesh2D, build_structured_mesh, mirror_map
from .problem import Problem
from .perturbation import perturbation_solve, mc_estimate
from .adjoint import robust_objective_and_gradient, cdm_gradient
from .optimize import optimize, OptimizationSettings, Continuation, Schedule

__version__ = "1.0.0"

__all__ = [
    "RTOError", "InvalidArgumentError", "GeometryError", "InadmissibleStateError",
    "ConfigurationError", "DegenerateFieldError", "SolverFailure", "RankDeficiencyError",
    "OracleUnreliableError", "Mesh2D", "build_structured_mesh", "mirror_map", "Problem",
    "perturbation_solve", "mc_estimate", "robust_objective_and_gradient", "cdm_gradient",
    "optimize", "OptimizationSettings", "Continuation", "Schedule", "__version__",
]
