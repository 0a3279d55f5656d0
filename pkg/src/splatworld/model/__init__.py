"""Dual Gaussian-particle model: bonds, initialization, correction."""

from .bonds import apply_bonds, attach_bonds
from .correction import CorrectionConfig, compute_visual_forces, predict_correct_step
from .embodied import EmbodiedModel, ObjectMeta
from .init import InitConfig, ObjectInit, build_object_shapes, initialize_object, project_collisions

__all__ = [
    "CorrectionConfig",
    "EmbodiedModel",
    "InitConfig",
    "ObjectInit",
    "ObjectMeta",
    "apply_bonds",
    "attach_bonds",
    "build_object_shapes",
    "compute_visual_forces",
    "initialize_object",
    "predict_correct_step",
    "project_collisions",
]
