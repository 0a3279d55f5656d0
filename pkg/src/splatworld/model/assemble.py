"""Combine per-object builds and background Gaussians into one model."""

from __future__ import annotations

import numpy as np

from ..geometry import Plane
from ..physics.state import ParticleState, Shape
from ..rendering.gaussians import GaussianSet
from .embodied import EmbodiedModel, ObjectMeta
from .init import ObjectInit


def _concat_particles(states: list[ParticleState]) -> ParticleState:
    out = ParticleState.__new__(ParticleState)
    names = [
        "x", "v", "q", "w", "f", "radius", "mass", "kinematic",
        "body_id", "x_rest", "q_rest", "target_x", "target_q",
    ]
    for name in names:
        setattr(out, name, np.concatenate([getattr(s, name) for s in states]))
    return out


def assemble_model(
    parts: list[tuple[ObjectMeta, ObjectInit]],
    background: GaussianSet | None,
    plane: Plane | None,
    seg_channels: int | None = None,
) -> EmbodiedModel:
    """Merge object builds (with local particle indexing) into one model.

    Object Gaussians get one-hot segmentation rows at their meta.seg_channel;
    background Gaussians stay unbonded with zero segmentation weights.
    """
    if seg_channels is None:
        seg_channels = max((m.seg_channel for m, _ in parts), default=-1) + 1

    states = []
    shapes: list[Shape] = []
    gsets = []
    offsets = []
    rots = []
    metas = []
    base = 0
    for meta, part in parts:
        states.append(part.particles)
        for s in part.shapes:
            shapes.append(
                Shape(
                    s.indices + base,
                    s.stiffness,
                    rest_centroid=s.rest_centroid,
                    total_mass=s.total_mass,
                    orient_indices=s.orient_indices + base,
                    prev_rotation=s.prev_rotation,
                )
            )
        g = part.gaussians.copy()
        g.parent = g.parent + base
        seg = np.zeros((g.count, seg_channels))
        if meta.seg_channel >= 0:
            seg[:, meta.seg_channel] = 1.0
        g.seg = seg
        gsets.append(g)
        offsets.append(part.bond_offset)
        rots.append(part.bond_rot)
        metas.append(meta)
        base += part.particles.count

    if background is not None and background.count:
        bg = background.copy()
        bg.seg = np.zeros((bg.count, seg_channels))
        bg.parent = np.full(bg.count, -1, dtype=np.int64)
        gsets.append(bg)
        offsets.append(np.zeros((bg.count, 3)))
        rots.append(np.tile([0.0, 0.0, 0.0, 1.0], (bg.count, 1)))

    particles = _concat_particles(states)
    gaussians = GaussianSet.concatenate(gsets)
    return EmbodiedModel(
        particles,
        shapes,
        gaussians,
        np.concatenate(offsets),
        np.concatenate(rots),
        metas,
        plane,
    )
