"""Isogeometric Gray-Scott reaction-diffusion on a growing closed surface.

The surface is a six-patch spline image of the cube boundary, the
concentrations live in the same (optionally hierarchically refined) spline
space, and each time step couples two linear solves with a weak-form normal
growth update.
"""
from .assembly import QuadratureGrid, QuadratureRule, assemble, l2_project
from .config import RunConfig, preset
from .driver import RunLogRecord, Simulation, build_initial_condition, load_checkpoint, run, table1_harness
from .errors import (
    CapacityError,
    DegenerateMetric,
    InvalidArgument,
    NumericalFailure,
    OutOfDomain,
    StepRejected,
    UnsupportedLocation,
)
from .geometry import MappingOperator, cube_to_sphere
from .integrator import ModelParameters, PIDGains, SimulationState, pid_select, take_step
from .kernels import BACKEND
from .space import SplineSpace
from .spline import KnotVector, TensorBasis, UnivariateBasis
from .topology import GlobalDofMap, build_cube_topology, build_global_basis
from .vtk import export_surface

__version__ = "0.1.0"
