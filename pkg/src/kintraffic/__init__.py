"""Deterministic solver for a kinetic traffic model with an activity variable.

The distribution ``f(t, x, v, u)`` of vehicles over position, speed and
driver activity evolves under free streaming, a mean-field acceleration,
short-range stochastic interactions and a relaxation toward an externally
imposed equilibrium.
"""

from .collision import CollisionWorkspace, collision_J, gain_field, loss_field, relaxation_T
from .core import DistributionField, GridSpec, MacroFields, ModelParams, density, l1_distance, mass, moments
from .kernels import ExternalAction, mean_field, transition_density, velocity_bounds
from .solver import GuardError, SolverConfig, Trajectory, fixed_point_solve, run, step_direct
from .transport import FrozenForce, backtrace, forward_trace, jacobian_weight, transport_step

__version__ = "0.1.0"

__all__ = [
    "CollisionWorkspace", "DistributionField", "ExternalAction", "FrozenForce", "GridSpec", "GuardError",
    "MacroFields", "ModelParams", "SolverConfig", "Trajectory", "backtrace", "collision_J", "density",
    "fixed_point_solve", "forward_trace", "gain_field", "jacobian_weight", "l1_distance", "loss_field", "mass",
    "mean_field", "moments", "relaxation_T", "run", "step_direct", "transition_density", "transport_step",
    "velocity_bounds",
]
