"""Oriented-particle position-based dynamics."""

from .broadphase import broad_phase
from .constraints import collision_delta, collision_deltas_batch, ground_delta, shape_match
from .engine import physics_step, set_kinematic_targets
from .state import ParticleState, PhysicsConfig, Shape, ShapeSet

__all__ = [
    "ParticleState",
    "PhysicsConfig",
    "Shape",
    "ShapeSet",
    "broad_phase",
    "collision_delta",
    "collision_deltas_batch",
    "ground_delta",
    "shape_match",
    "physics_step",
    "set_kinematic_targets",
]
