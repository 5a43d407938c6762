"""2D incompressible Navier-Stokes Taylor-Hood benchmark solver.

Convection forms conserving energy/momentum/angular momentum (emac),
skew-symmetrized (skew) and plain convective (conv), under a coupled
midpoint scheme, a backward-Euler pressure-correction projection, and a
rotational pressure-correction projection.
"""

__version__ = "0.1.0"

from .mesh import Mesh, PeriodicMap, build_rect_mesh, build_periodic_map, validate_mesh
from .dofmap import DofMap, VelocityBC, build_taylor_hood, apply_constraints
from .fields import FeField, interpolate, zero_field
from .quadrature import QuadratureRule, triangle_rule
from .assemble import assemble_bilinear, assemble_convection
from .linsolve import NewtonConfig, newton_solve, sparse_solve
from .schemes import SchemeConfig, TimeState, make_stepper
from .transport import step_transport_bdf2
from .diagnostics import (DiagnosticsRecord, compute_invariants,
                          compute_errors, check_energy_inequality)
from .problems import (ProblemSpec, get_problem, problem_planar_lattice,
                       problem_gresho, problem_channel_transport,
                       problem_manufactured)
from .runner import ProbeSchedule, SimulationResult, run_simulation

__all__ = [
    "Mesh", "PeriodicMap", "build_rect_mesh", "build_periodic_map",
    "validate_mesh", "DofMap", "VelocityBC", "build_taylor_hood",
    "apply_constraints", "FeField", "interpolate", "zero_field",
    "QuadratureRule", "triangle_rule", "assemble_bilinear",
    "assemble_convection", "NewtonConfig", "newton_solve", "sparse_solve",
    "SchemeConfig", "TimeState", "make_stepper", "step_transport_bdf2",
    "DiagnosticsRecord", "compute_invariants", "compute_errors",
    "check_energy_inequality", "ProblemSpec", "get_problem",
    "problem_planar_lattice", "problem_gresho", "problem_channel_transport",
    "problem_manufactured", "ProbeSchedule", "SimulationResult",
    "run_simulation",
]
