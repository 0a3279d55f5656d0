"""Prediction-correction loop: physics prediction plus visual forces.

The correction never moves Gaussians directly. A short photometric
optimization displaces them, the displacements become forces on the bonded
particles, and the Gaussians are reset; the next physics step resolves the
forces under the physical constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..adam import Adam
from ..errors import NoObservations
from ..physics.engine import physics_step, set_kinematic_targets
from ..physics.state import PhysicsConfig
from ..rendering.rasterizer import backward
from .embodied import EmbodiedModel


@dataclass
class CorrectionConfig:
    kp: float = 60.0  # N/m visual gain
    adam_iterations: int = 5
    displacement_threshold: float = 0.002  # m; smaller displacements are noise
    lr_position: float = 1e-3
    lr_rotation: float = 1e-4
    lr_color: float = 5e-4
    lr_opacity: float = 5e-4
    scale_frozen: bool = True
    opacity_weighted: bool = True  # weight forces by Gaussian opacity


def compute_visual_forces(
    model: EmbodiedModel,
    observations: list,
    cfg: CorrectionConfig,
    rng: np.random.Generator | int | None = 0,
) -> np.ndarray:
    """Per-particle corrective forces from photometric disagreement.

    Runs cfg.adam_iterations optimization steps, each against one randomly
    chosen observation (image, camera). Only Gaussians bonded to dynamic
    particles move; every Gaussian may adapt color and opacity (these
    changes persist and absorb lighting effects such as shadows). Positions
    and rotations are restored bit-exactly before returning.
    """
    if not observations:
        raise NoObservations("need at least one (image, camera) observation")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    g = model.gaussians
    saved_x = g.x.copy()
    saved_q = g.q.copy()
    movable = model.object_gaussian_mask()

    which = {"position", "rotation", "color", "opacity"}
    if not cfg.scale_frozen:
        which.add("scale")
    opt = Adam(
        {
            "position": cfg.lr_position,
            "rotation": cfg.lr_rotation,
            "color": cfg.lr_color,
            "opacity": cfg.lr_opacity,
            "scale": cfg.lr_position,
        }
    )
    for _ in range(cfg.adam_iterations):
        image, cam = observations[int(rng.integers(len(observations)))]
        grads = backward(g, cam, image, which_params=which)
        grads.x[~movable] = 0.0
        grads.q[~movable] = 0.0
        a = g.opacity
        params = {
            "position": g.x,
            "rotation": g.q,
            "color": g.color,
            "opacity": g.opacity_logit,
        }
        gdict = {
            "position": grads.x,
            "rotation": grads.q,
            "color": grads.c,
            "opacity": grads.a * a * (1.0 - a),
        }
        if not cfg.scale_frozen:
            params["scale"] = g.scale
            gdict["scale"] = grads.s
        opt.step(params, gdict)
        g.q /= np.linalg.norm(g.q, axis=-1, keepdims=True)
        np.clip(g.color, 0.0, 1.0, out=g.color)

    forces = np.zeros((model.particles.count, 3))
    idx = np.flatnonzero(movable)
    if idx.size:
        disp = g.x[idx] - saved_x[idx]
        small = np.linalg.norm(disp, axis=1) < cfg.displacement_threshold
        disp[small] = 0.0
        weight = cfg.kp * (g.opacity[idx] if cfg.opacity_weighted else np.ones(idx.size))
        np.add.at(forces, g.parent[idx], weight[:, None] * disp)

    g.x = saved_x
    g.q = saved_q
    return forces


def predict_correct_step(
    model: EmbodiedModel,
    observations: list,
    physics_cfg: PhysicsConfig,
    correction_cfg: CorrectionConfig,
    rng: np.random.Generator | int | None = 0,
    kinematic_targets: dict | None = None,
    profile: dict | None = None,
) -> EmbodiedModel:
    """One world-model update: predict with physics, correct from images.

    Forces computed here are consumed by the next step's physics (one-step
    latency), so the model state is always the output of the physics system.
    Pass a dict as `profile` to collect per-stage millisecond timings.
    """
    from time import perf_counter

    if kinematic_targets:
        for body_id, target in kinematic_targets.items():
            x_t, q_t = target if isinstance(target, tuple) else (target, None)
            set_kinematic_targets(model.particles, body_id, x_t, q_t)
    t0 = perf_counter()
    physics_step(model.particles, physics_cfg, model.shape_set, model.plane)
    model.apply_bonds()
    t1 = perf_counter()
    model.particles.f[:] = compute_visual_forces(model, observations, correction_cfg, rng)
    t2 = perf_counter()
    if profile is not None:
        profile.setdefault("physics_ms", []).append(1e3 * (t1 - t0))
        profile.setdefault("correction_ms", []).append(1e3 * (t2 - t1))
    return model
