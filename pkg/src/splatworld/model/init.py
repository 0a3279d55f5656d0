"""Object initialization: grid-filled Gaussians refined into a bonded dual model.

Stages: fill the bounding box with spherical Gaussians, prune against the
instance masks, jointly optimize photometric+segmentation loss while
projecting centers out of collisions and the ground (the Gaussians act as
particles for this stage only), prune faint Gaussians, spawn particles and
shape constraints, refine with densification, then bond Gaussians to their
nearest particles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..adam import Adam
from ..errors import EmptyObject, NoViews
from ..geometry import Plane
from ..physics.broadphase import broad_phase
from ..physics.constraints import collision_deltas_batch
from ..physics.state import ParticleState, Shape
from ..rendering.gaussians import GaussianSet
from ..rendering.rasterizer import backward
from .bonds import attach_bonds
from .embodied import ObjectMeta


@dataclass
class InitConfig:
    n_joint_iters: int = 80
    m_refine_iters: int = 250
    opacity_prune: float = 0.3
    gaussian_radius: float = 0.005
    particle_mass: float = 0.1
    lr_position: float = 1e-4
    lr_color: float = 2.5e-3
    lr_scale: float = 1e-3
    lr_opacity: float = 1e-2
    lr_rotation: float = 1e-3
    jacobi_iterations: int = 4
    collision_relaxation: float = 0.8
    densify_interval: int = 50
    densify_quantile: float = 0.9
    max_gaussian_factor: float = 4.0
    bond_radius_mult: float = 3.0
    init_opacity: float = 0.6
    init_scale_factor: float = 0.7
    scale_bounds_mult: tuple = (0.2, 4.0)
    deformable_stiffness: float = 0.3
    deformable_neighbor_mult: float = 2.5


@dataclass
class ObjectInit:
    particles: ParticleState
    shapes: list
    gaussians: GaussianSet
    bond_offset: np.ndarray
    bond_rot: np.ndarray


def _grid_fill(bbox_min, bbox_max, spacing):
    ticks = []
    for k in range(3):
        lo = bbox_min[k] + spacing / 2.0
        hi = bbox_max[k] - spacing / 2.0
        if hi < lo:
            ticks.append(np.array([(bbox_min[k] + bbox_max[k]) / 2.0]))
        else:
            ticks.append(np.arange(lo, hi + 1e-12, spacing))
    gx, gy, gz = np.meshgrid(*ticks, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=-1)


def _prune_by_masks(points, views):
    keep = np.ones(points.shape[0], dtype=bool)
    for _, mask, cam in views:
        if not np.any(mask):
            continue  # object not visible in this view
        u, _, _, valid = cam.project_many(points)
        px = np.floor(u[:, 0]).astype(int)
        py = np.floor(u[:, 1]).astype(int)
        inside = (
            valid
            & (px >= 0)
            & (px < cam.width)
            & (py >= 0)
            & (py < cam.height)
        )
        in_mask = np.zeros(points.shape[0], dtype=bool)
        in_mask[inside] = mask[py[inside], px[inside]]
        keep &= in_mask
    return keep


def _sample_colors(points, views):
    """Mean observed color at each projected center; gray when never visible."""
    total = np.zeros((points.shape[0], 3))
    hits = np.zeros(points.shape[0])
    for image, mask, cam in views:
        u, _, _, valid = cam.project_many(points)
        px = np.clip(np.floor(u[:, 0]).astype(int), 0, cam.width - 1)
        py = np.clip(np.floor(u[:, 1]).astype(int), 0, cam.height - 1)
        total[valid] += image[py[valid], px[valid]]
        hits[valid] += 1.0
    out = np.full((points.shape[0], 3), 0.5)
    seen = hits > 0
    out[seen] = total[seen] / hits[seen, None]
    return out


def project_collisions(
    x: np.ndarray,
    radius: float,
    plane: Plane | None,
    iterations: int = 4,
    mu_collision: float = 0.8,
    mu_ground: float = 1.0,
) -> np.ndarray:
    """Jacobi position projection (no dynamics) for equal-radius points."""
    x = x.copy()
    n = x.shape[0]
    radii = np.full(n, radius)
    inv_mass = np.ones(n)
    for _ in range(iterations):
        delta = np.zeros_like(x)
        cnt = np.zeros(n)
        pairs = broad_phase(x, radii)
        if pairs.size:
            di, dj, act = collision_deltas_batch(x, radii, inv_mass, pairs, mu_collision)
            np.add.at(delta, pairs[act, 0], di[act])
            np.add.at(delta, pairs[act, 1], dj[act])
            np.add.at(cnt, pairs[act, 0], 1.0)
            np.add.at(cnt, pairs[act, 1], 1.0)
        if plane is not None:
            c = np.minimum(plane.signed_distance(x) - radii, 0.0)
            active = c < 0.0
            delta[active] += (-mu_ground * c[active])[:, None] * plane.n
            cnt[active] += 1.0
        x += delta / np.maximum(cnt, 1.0)[:, None]
    return x


def build_object_shapes(state: ParticleState, rigid: bool, cfg: InitConfig) -> list[Shape]:
    """One full-body shape for rigid objects; particle neighborhoods otherwise."""
    n = state.count
    if n < 2:
        return []
    if rigid:
        shape = Shape(np.arange(n), 1.0)
        shape.cache_rest(state)
        return [shape]
    shapes = []
    reach = cfg.deformable_neighbor_mult * float(state.radius.max())
    for i in range(n):
        d = np.linalg.norm(state.x - state.x[i], axis=1)
        members = np.flatnonzero(d <= reach)
        if members.size < 2:
            continue
        shape = Shape(members, cfg.deformable_stiffness, orient_indices=np.array([i]))
        shape.cache_rest(state)
        shapes.append(shape)
    return shapes


def initialize_object(
    views: list,
    bbox,
    meta: ObjectMeta,
    cfg: InitConfig,
    scene_gaussians: GaussianSet | None = None,
    plane: Plane | None = None,
) -> ObjectInit:
    """Build the dual Gaussian-particle representation of one object.

    `views` is a list of (image, instance_mask, camera) for the training
    cameras at the initialization frame. `scene_gaussians` (background plus
    previously built objects) render for occlusion but are never optimized.
    """
    if views is None or len(views) < 2:
        raise NoViews("object initialization needs at least two views")
    bbox = np.asarray(bbox, dtype=float).reshape(2, 3)
    if np.any(bbox[1] - bbox[0] <= 0):
        raise ValueError("degenerate bounding box")

    r = cfg.gaussian_radius
    centers = _grid_fill(bbox[0], bbox[1], 2.0 * r)
    keep = _prune_by_masks(centers, views)
    centers = centers[keep]
    if centers.shape[0] == 0:
        raise EmptyObject(f"{meta.name}: no Gaussians survive the mask pruning")

    obj = GaussianSet(
        centers,
        scale=cfg.init_scale_factor * r,
        opacity=cfg.init_opacity,
        color=_sample_colors(centers, views),
        seg=np.ones((centers.shape[0], 1)),
    )
    if scene_gaussians is not None and scene_gaussians.count:
        scene = scene_gaussians.copy()
        scene.seg = np.zeros((scene.count, 1))
    else:
        scene = GaussianSet(np.zeros((0, 3)), seg_channels=1)

    opt = Adam(
        {
            "position": cfg.lr_position,
            "color": cfg.lr_color,
            "opacity": cfg.lr_opacity,
            "scale": cfg.lr_scale,
        }
    )

    def adam_round(image, mask, cam, with_seg, with_scale):
        combined = GaussianSet.concatenate([scene, obj])
        which = {"position", "opacity", "color"} | ({"scale"} if with_scale else set())
        grads = backward(
            combined,
            cam,
            image,
            observed_seg=mask[..., None].astype(float) if with_seg else None,
            which_params=which,
        )
        lo = scene.count
        a = obj.opacity
        params = {
            "position": obj.x,
            "color": obj.color,
            "opacity": obj.opacity_logit,
        }
        grads_d = {
            "position": grads.x[lo:],
            "color": grads.c[lo:],
            "opacity": grads.a[lo:] * a * (1.0 - a),
        }
        if with_scale:
            params["scale"] = obj.scale
            grads_d["scale"] = grads.s[lo:]
        opt.step(params, grads_d)
        np.clip(obj.color, 0.0, 1.0, out=obj.color)
        if with_scale:
            np.clip(
                obj.scale,
                cfg.scale_bounds_mult[0] * r,
                cfg.scale_bounds_mult[1] * r,
                out=obj.scale,
            )

    # joint stage: photometric + segmentation descent with physical projection
    for _ in range(cfg.n_joint_iters):
        for image, mask, cam in views:
            adam_round(image, mask, cam, with_seg=True, with_scale=False)
        obj.x = project_collisions(
            obj.x,
            r,
            plane,
            iterations=cfg.jacobi_iterations,
            mu_collision=cfg.collision_relaxation,
        )

    bright = obj.opacity >= cfg.opacity_prune
    if not np.any(bright):
        raise EmptyObject(f"{meta.name}: all Gaussians pruned at opacity {cfg.opacity_prune}")
    obj = obj.select(bright)

    particles = ParticleState(
        obj.x.copy(),
        radius=r,
        mass=meta.mass,
        body_id=np.full(obj.count, meta.body_id),
        kinematic=np.full(obj.count, meta.kinematic, dtype=bool),
    )
    shapes = build_object_shapes(particles, meta.rigid, cfg)

    # refinement: photometric only, scales free, collisions off, densification on
    opt.reset()
    max_count = int(cfg.max_gaussian_factor * obj.count)
    grad_accum = np.zeros(obj.count)
    since_densify = 0
    for it in range(cfg.m_refine_iters):
        for image, mask, cam in views:
            combined = GaussianSet.concatenate([scene, obj])
            grads = backward(
                combined,
                cam,
                image,
                which_params={"position", "opacity", "color", "scale"},
            )
            lo = scene.count
            a = obj.opacity
            opt.step(
                {
                    "position": obj.x,
                    "color": obj.color,
                    "opacity": obj.opacity_logit,
                    "scale": obj.scale,
                },
                {
                    "position": grads.x[lo:],
                    "color": grads.c[lo:],
                    "opacity": grads.a[lo:] * a * (1.0 - a),
                    "scale": grads.s[lo:],
                },
            )
            np.clip(obj.color, 0.0, 1.0, out=obj.color)
            np.clip(
                obj.scale,
                cfg.scale_bounds_mult[0] * r,
                cfg.scale_bounds_mult[1] * r,
                out=obj.scale,
            )
            grad_accum += np.linalg.norm(grads.x[lo:], axis=1)
        since_densify += 1
        if since_densify >= cfg.densify_interval and obj.count < max_count:
            obj = _densify(obj, grad_accum, cfg, r)
            grad_accum = np.zeros(obj.count)
            since_densify = 0
            opt.reset()  # moment shapes changed

    parent, offset, rotation = attach_bonds(
        obj, particles.x, particles.q, cfg.bond_radius_mult * r
    )
    bonded = parent >= 0
    if not np.any(bonded):
        raise EmptyObject(f"{meta.name}: no Gaussian survived bonding")
    obj = obj.select(bonded)
    obj.parent = parent[bonded]
    return ObjectInit(particles, shapes, obj, offset[bonded], rotation[bonded])


def _densify(obj: GaussianSet, grad_accum: np.ndarray, cfg: InitConfig, r: float) -> GaussianSet:
    """Clone/split the highest-gradient Gaussians along their major axis."""
    if obj.count == 0:
        return obj
    cutoff = np.quantile(grad_accum, cfg.densify_quantile)
    hot = np.flatnonzero((grad_accum >= cutoff) & (grad_accum > 0))
    if hot.size == 0:
        return obj
    from ..geometry import quat_to_matrix

    rot = quat_to_matrix(obj.q[hot])
    major = np.argmax(obj.scale[hot], axis=1)
    axis = rot[np.arange(hot.size), :, major]
    sigma = obj.scale[hot, major]
    big = sigma > 1.2 * r

    children = obj.select(hot)
    # split: shrink and separate along the major axis
    children.scale[big] /= 1.6
    children.x[big] += 0.5 * sigma[big, None] * axis[big]
    obj.x[hot[big]] -= 0.5 * sigma[big, None] * axis[big]
    obj.scale[hot[big]] /= 1.6
    # clone: nudge the copy so the pair can specialize
    children.x[~big] += 0.25 * sigma[~big, None] * axis[~big]
    return GaussianSet.concatenate([obj, children])
