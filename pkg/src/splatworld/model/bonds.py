"""Gaussian-particle bonds: rigid transforms from parent particles to Gaussians."""

from __future__ import annotations

import numpy as np

from ..geometry import quat_conjugate, quat_mul, quat_rotate
from ..rendering.gaussians import GaussianSet


def attach_bonds(
    gaussians: GaussianSet,
    particle_x: np.ndarray,
    particle_q: np.ndarray,
    threshold: float,
):
    """Bond each Gaussian to its nearest particle (ties go to lowest index).

    Returns (parent (M,), offset (M,3), rotation (M,4)); Gaussians farther
    than `threshold` from every particle stay unbonded with parent -1.
    """
    m = gaussians.count
    n = particle_x.shape[0]
    if n == 0:
        raise ValueError("cannot bond to an empty particle set")
    parent = np.full(m, -1, dtype=np.int64)
    offset = np.zeros((m, 3))
    rotation = np.tile(np.array([0.0, 0.0, 0.0, 1.0]), (m, 1))
    chunk = max(1, int(2e6) // max(n, 1))
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        d2 = ((gaussians.x[lo:hi, None, :] - particle_x[None, :, :]) ** 2).sum(axis=-1)
        j = np.argmin(d2, axis=1)  # first index wins ties
        dmin = np.sqrt(d2[np.arange(hi - lo), j])
        ok = dmin <= threshold
        parent[lo:hi][ok] = j[ok]
    bonded = parent >= 0
    p = parent[bonded]
    inv_q = quat_conjugate(particle_q[p])
    offset[bonded] = quat_rotate(inv_q, gaussians.x[bonded] - particle_x[p])
    rotation[bonded] = quat_mul(inv_q, gaussians.q[bonded])
    return parent, offset, rotation


def apply_bonds(model):
    """Snap bonded Gaussians onto their parent particles' current poses."""
    g = model.gaussians
    bonded = g.parent >= 0
    if not np.any(bonded):
        return
    p = g.parent[bonded]
    px = model.particles.x[p]
    pq = model.particles.q[p]
    g.x[bonded] = px + quat_rotate(pq, model.bond_offset[bonded])
    q = quat_mul(pq, model.bond_rot[bonded])
    g.q[bonded] = q / np.linalg.norm(q, axis=-1, keepdims=True)
