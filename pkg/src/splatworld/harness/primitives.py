"""Reference-scene builders: textured surface Gaussians and particle fills.

These construct the synthetic "reality" that stands in for real cameras:
dense Gaussians on object surfaces with procedural textures, interior
particle fills for reference dynamics, a thin-disk tabletop, and a simple
kinematic pusher body.
"""

from __future__ import annotations

import numpy as np

from ..geometry import quat_from_two_vectors, quat_normalize
from ..model.bonds import attach_bonds
from ..model.embodied import ObjectMeta
from ..model.init import ObjectInit
from ..physics.state import ParticleState, Shape
from ..rendering.gaussians import GaussianSet

PALETTE = np.array(
    [
        [0.85, 0.25, 0.20],
        [0.20, 0.45, 0.85],
        [0.95, 0.75, 0.15],
        [0.25, 0.70, 0.35],
        [0.70, 0.30, 0.75],
        [0.90, 0.50, 0.20],
    ]
)


def checker_colors(points: np.ndarray, cell: float, c0, c1) -> np.ndarray:
    parity = np.floor(points / cell + 1e-9).astype(int).sum(axis=1) % 2
    return np.where(parity[:, None] == 0, np.asarray(c0), np.asarray(c1))


def textured_colors(points: np.ndarray, seed: int, cell: float = 0.015) -> np.ndarray:
    rng = np.random.default_rng(seed)
    i, j = rng.choice(len(PALETTE), size=2, replace=False)
    colors = checker_colors(points, cell, PALETTE[i], PALETTE[j])
    jitter = rng.normal(scale=0.03, size=colors.shape)
    return np.clip(colors + jitter, 0.02, 0.98)


def _face_grid(half, axis: int, sign: float, spacing: float):
    """Points and outward normals covering one box face."""
    other = [k for k in range(3) if k != axis]
    ticks = [
        np.arange(-half[k] + spacing / 2.0, half[k] - spacing / 2.0 + 1e-9, spacing)
        if half[k] > spacing / 2.0
        else np.array([0.0])
        for k in other
    ]
    ga, gb = np.meshgrid(*ticks, indexing="ij")
    pts = np.zeros((ga.size, 3))
    pts[:, other[0]] = ga.ravel()
    pts[:, other[1]] = gb.ravel()
    pts[:, axis] = sign * half[axis]
    normal = np.zeros(3)
    normal[axis] = sign
    return pts, normal


def box_surface(half, spacing: float):
    """Local points, orientations, and scales tiling a box surface."""
    pts, quats, scales = [], [], []
    tangential = 0.75 * spacing
    normal_sigma = spacing / 4.0
    for axis in range(3):
        for sign in (-1.0, 1.0):
            p, n = _face_grid(half, axis, sign, spacing)
            q = quat_from_two_vectors([0.0, 0.0, 1.0], n)
            pts.append(p)
            quats.append(np.tile(q, (p.shape[0], 1)))
            scales.append(np.tile([tangential, tangential, normal_sigma], (p.shape[0], 1)))
    return np.concatenate(pts), np.concatenate(quats), np.concatenate(scales)


def cylinder_surface(radius: float, height: float, spacing: float):
    pts, quats, scales = [], [], []
    tangential = 0.75 * spacing
    thin = spacing / 4.0
    n_ring = max(6, int(round(2 * np.pi * radius / spacing)))
    angles = np.linspace(0, 2 * np.pi, n_ring, endpoint=False)
    zs = np.arange(-height / 2 + spacing / 2, height / 2 - spacing / 2 + 1e-9, spacing)
    if zs.size == 0:
        zs = np.array([0.0])
    for z in zs:
        for ang in angles:
            n = np.array([np.cos(ang), np.sin(ang), 0.0])
            pts.append(radius * n + [0.0, 0.0, z])
            quats.append(quat_from_two_vectors([0.0, 0.0, 1.0], n))
            scales.append([tangential, tangential, thin])
    for sign in (-1.0, 1.0):  # caps
        rr = np.arange(spacing / 2, radius - spacing / 4, spacing)
        cap_pts = [[0.0, 0.0, sign * height / 2]]
        for r in rr:
            k = max(4, int(round(2 * np.pi * r / spacing)))
            for ang in np.linspace(0, 2 * np.pi, k, endpoint=False):
                cap_pts.append([r * np.cos(ang), r * np.sin(ang), sign * height / 2])
        for p in cap_pts:
            pts.append(p)
            quats.append(quat_from_two_vectors([0.0, 0.0, 1.0], [0.0, 0.0, sign]))
            scales.append([tangential, tangential, thin])
    return np.asarray(pts), np.asarray(quats), np.asarray(scales)


def box_fill(half, radius: float) -> np.ndarray:
    ticks = [
        np.arange(-half[k] + radius, half[k] - radius + 1e-9, 2 * radius)
        if half[k] > radius
        else np.array([0.0])
        for k in range(3)
    ]
    gx, gy, gz = np.meshgrid(*ticks, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=-1)


def cylinder_fill(radius: float, height: float, p_radius: float) -> np.ndarray:
    pts = box_fill([radius, radius, height / 2.0], p_radius)
    keep = np.linalg.norm(pts[:, :2], axis=1) <= radius - p_radius + 1e-9
    return pts[keep]


def tblock_parts(size):
    """Two sub-box (half, offset) pairs forming a T: top bar plus stem."""
    w, d, h = size  # overall width, depth, height
    bar_half = np.array([w / 2, d / 6, h / 2])
    stem_half = np.array([d / 6, d / 2 - d / 6, h / 2])
    bar_off = np.array([0.0, d / 2 - d / 6, 0.0])
    stem_off = np.array([0.0, -d / 6, 0.0])
    return [(bar_half, bar_off), (stem_half, stem_off)]


def yaw_quat(yaw: float) -> np.ndarray:
    return np.array([0.0, 0.0, np.sin(yaw / 2.0), np.cos(yaw / 2.0)])


def yaw_rotate(points: np.ndarray, yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    out = np.array(points, dtype=float).reshape(-1, 3).copy()
    x, y = out[:, 0].copy(), out[:, 1].copy()
    out[:, 0] = c * x - s * y
    out[:, 1] = s * x + c * y
    return out


def build_reference_object(spec, meta: ObjectMeta, gaussian_spacing: float = 0.006) -> ObjectInit:
    """Dense textured Gaussians bonded to a particle fill for one object.

    `spec` needs: shape ("box"|"cylinder"|"tblock"|"rope"), size, pose
    (position + yaw), color_seed, particle_radius, rigid.
    """
    pr = spec.particle_radius
    if spec.shape == "box":
        half = np.asarray(spec.size, dtype=float) / 2.0
        g_pts, g_q, g_s = box_surface(half, gaussian_spacing)
        p_pts = box_fill(half, pr)
    elif spec.shape == "cylinder":
        radius, height = spec.size[0], spec.size[2]
        g_pts, g_q, g_s = cylinder_surface(radius, height, gaussian_spacing)
        p_pts = cylinder_fill(radius, height, pr)
    elif spec.shape == "tblock":
        parts = tblock_parts(np.asarray(spec.size, dtype=float))
        gp, gq, gs, pp = [], [], [], []
        for half, off in parts:
            a, b, c = box_surface(half, gaussian_spacing)
            gp.append(a + off)
            gq.append(b)
            gs.append(c)
            pp.append(box_fill(half, pr) + off)
        g_pts, g_q, g_s = np.concatenate(gp), np.concatenate(gq), np.concatenate(gs)
        p_pts = np.concatenate(pp)
    elif spec.shape == "rope":
        length, radius = spec.size[0], spec.size[1]
        n_links = max(3, int(round(length / (2 * pr))))
        p_pts = np.zeros((n_links, 3))
        p_pts[:, 0] = np.linspace(-length / 2 + pr, length / 2 - pr, n_links)
        g_pts, g_q, g_s = cylinder_surface(radius, length, gaussian_spacing)
        # cylinder_surface is axis-z; rope lies along x
        swap = quat_from_two_vectors([0.0, 0.0, 1.0], [1.0, 0.0, 0.0])
        from ..geometry import quat_mul, quat_rotate

        g_pts = quat_rotate(swap, g_pts)
        g_q = quat_mul(swap, g_q)
    else:
        raise ValueError(f"unknown shape {spec.shape!r}")

    colors = textured_colors(g_pts, spec.color_seed)
    pos = np.asarray(spec.pose[:3], dtype=float)
    yaw = float(spec.pose[3]) if len(spec.pose) > 3 else 0.0
    from ..geometry import quat_mul

    g_world = yaw_rotate(g_pts, yaw) + pos
    p_world = yaw_rotate(p_pts, yaw) + pos
    gq_world = quat_normalize(quat_mul(yaw_quat(yaw), g_q))

    particles = ParticleState(
        p_world,
        radius=pr,
        mass=meta.mass,
        body_id=np.full(p_world.shape[0], meta.body_id),
        kinematic=np.full(p_world.shape[0], meta.kinematic, dtype=bool),
    )
    gauss = GaussianSet(
        g_world,
        q=gq_world,
        scale=g_s,
        opacity=1.0,
        color=colors,
        seg=np.ones((g_world.shape[0], 1)),
    )
    parent, offset, rotation = attach_bonds(gauss, particles.x, particles.q, 6.0 * pr)
    bonded = parent >= 0
    gauss = gauss.select(bonded)
    gauss.parent = parent[bonded]

    from ..model.init import InitConfig, build_object_shapes

    shapes = build_object_shapes(particles, spec.rigid, InitConfig())
    return ObjectInit(particles, shapes, gauss, offset[bonded], rotation[bonded])


def build_table(extent: float = 0.7, spacing: float = 0.011, seed: int = 7) -> GaussianSet:
    """Thin-disk Gaussians tiling the tabletop at z = 0."""
    ticks = np.arange(-extent / 2, extent / 2 + 1e-9, spacing)
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=-1)
    rng = np.random.default_rng(seed)
    base = np.array([0.55, 0.47, 0.40])
    alt = np.array([0.42, 0.36, 0.30])
    colors = checker_colors(pts, 0.05, base, alt)
    colors = np.clip(colors + rng.normal(scale=0.02, size=colors.shape), 0.0, 1.0)
    return GaussianSet(
        pts,
        scale=np.tile([0.8 * spacing, 0.8 * spacing, 0.001], (pts.shape[0], 1)),
        opacity=1.0,
        color=colors,
    )


def build_pusher(spec, meta: ObjectMeta) -> ObjectInit:
    """Kinematic cylinder body standing in for the robot end effector."""
    radius, height = spec.radius, spec.height
    pr = min(radius, height / 2.0)
    p_pts = np.zeros((max(2, int(round(height / pr))), 3))
    p_pts[:, 2] = np.linspace(-height / 2 + pr / 2, height / 2 - pr / 2, p_pts.shape[0])
    g_pts, g_q, g_s = cylinder_surface(radius, height, 0.006)
    colors = np.tile([0.25, 0.25, 0.28], (g_pts.shape[0], 1))
    pos = np.asarray(spec.start, dtype=float)
    particles = ParticleState(
        p_pts + pos,
        radius=pr * np.ones(p_pts.shape[0]),
        mass=1.0,
        body_id=np.full(p_pts.shape[0], meta.body_id),
        kinematic=np.ones(p_pts.shape[0], dtype=bool),
    )
    # widen collision radius to the cylinder surface
    particles.radius[:] = radius
    gauss = GaussianSet(g_pts + pos, q=g_q, scale=g_s, opacity=1.0, color=colors, seg_channels=1)
    gauss.seg = np.zeros((gauss.count, 1))
    parent, offset, rotation = attach_bonds(gauss, particles.x, particles.q, 4.0 * radius)
    bonded = parent >= 0
    gauss = gauss.select(bonded)
    gauss.parent = parent[bonded]
    return ObjectInit(particles, [], gauss, offset[bonded], rotation[bonded])
