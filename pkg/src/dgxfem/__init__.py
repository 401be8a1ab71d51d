"""Unfitted discontinuous-Galerkin / XFEM solvers for elliptic interface problems.

Typical use::

    from dgxfem import CartesianMesh, partition_mesh, build_space, kappa_weights
    from dgxfem import SchemeParams, assemble, solve_spd, circle_case

    ls, problem = circle_case(10.0, 1.0)
    mesh = CartesianMesh(16)
    part = partition_mesh(mesh, ls, 8)
    space = build_space(mesh, part, p=2)
    system = assemble(space, part, kappa_weights(part), problem, SchemeParams.sipg())
    u, report = solve_spd(system)
"""
from .analysis import ErrorReport, broken_h1_error, jump_seminorm, l2_error, lift_seminorm, rates
from .errors import (AmbiguousCut, DegeneratePolygon, DegenerateSubcell, DgxfemError,
                     IllConditionedMass, InvalidThreshold, NoConvergence, NonPositiveError,
                     UnsupportedOrder)
from .forms import ExactSolution, ProblemData, SchemeParams, assemble, local_lifting
from .geometry import CartesianMesh, CellClass, LevelSetInterface, build_cutcell, partition_mesh
from .linalg import SparseSystem, solve_general, solve_spd
from .problems import circle_case, linear_jump_case, poisson_case
from .space import build_space, kappa_weights

__version__ = "0.1.0"

__all__ = [
    "AmbiguousCut", "CartesianMesh", "CellClass", "DegeneratePolygon", "DegenerateSubcell",
    "DgxfemError", "ErrorReport", "ExactSolution", "IllConditionedMass", "InvalidThreshold",
    "LevelSetInterface", "NoConvergence", "NonPositiveError", "ProblemData", "SchemeParams",
    "SparseSystem", "UnsupportedOrder", "assemble", "broken_h1_error", "build_cutcell",
    "build_space", "circle_case", "jump_seminorm", "kappa_weights", "l2_error", "lift_seminorm",
    "linear_jump_case", "local_lifting", "partition_mesh", "poisson_case", "rates",
    "solve_general", "solve_spd",
]
