"""PBD constraint deltas: ground, pairwise collision, shape matching."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateMatrix
from ..geometry import Plane, matrix_to_quat, quat_mul, quat_to_matrix
from .state import ParticleState, Shape

_COINCIDENT_EPS = 1e-9


def ground_delta(x: np.ndarray, radius, plane: Plane, mu: float = 1.0) -> np.ndarray:
    """Position correction pushing penetrating particles out of the plane.

    C = min(n.x + d - r, 0); the correction is -mu * C * n (zero when the
    particle clears the plane). Accepts one particle or a batch.
    """
    x = np.asarray(x, dtype=float)
    c = np.minimum(plane.signed_distance(x) - radius, 0.0)
    return (-mu * c)[..., None] * plane.n


def collision_delta(xi, xj, ri: float, rj: float, wi: float, wj: float, mu: float = 1.0):
    """Pair separation deltas (dxi, dxj) for two spheres.

    C = min(|xi-xj| - ri - rj, 0). Deltas push the pair apart along the
    center line, split by inverse mass; a kinematic particle (w = 0) takes
    no share. Exactly coincident centers separate deterministically along +x.
    """
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    diff = xi - xj
    dist = float(np.linalg.norm(diff))
    if wi + wj == 0.0:
        return np.zeros(3), np.zeros(3)
    if dist < _COINCIDENT_EPS:
        normal = np.array([1.0, 0.0, 0.0])
        c = -(ri + rj)
    else:
        normal = diff / dist
        c = min(dist - ri - rj, 0.0)
    if c >= 0.0:
        return np.zeros(3), np.zeros(3)
    shared = (-c) * mu / (wi + wj) * normal
    return wi * shared, -wj * shared


def collision_deltas_batch(
    x: np.ndarray,
    radius: np.ndarray,
    inv_mass: np.ndarray,
    pairs: np.ndarray,
    mu: float,
):
    """Vectorized collision deltas for an (P, 2) index pair array.

    Returns (di (P,3), dj (P,3), active (P,) bool). Pairs whose combined
    inverse mass is zero are inactive.
    """
    if pairs.size == 0:
        z = np.zeros((0, 3))
        return z, z, np.zeros(0, dtype=bool)
    i, j = pairs[:, 0], pairs[:, 1]
    diff = x[i] - x[j]
    dist = np.linalg.norm(diff, axis=1)
    wi, wj = inv_mass[i], inv_mass[j]
    wsum = wi + wj
    coincident = dist < _COINCIDENT_EPS
    safe_dist = np.where(coincident, 1.0, dist)
    normal = diff / safe_dist[:, None]
    normal[coincident] = (1.0, 0.0, 0.0)
    c = np.minimum(dist - radius[i] - radius[j], 0.0)
    c[coincident] = -(radius[i][coincident] + radius[j][coincident])
    active = (c < 0.0) & (wsum > 0.0)
    scale = np.where(active, (-c) * mu / np.where(wsum > 0.0, wsum, 1.0), 0.0)
    shared = scale[:, None] * normal
    return wi[:, None] * shared, -wj[:, None] * shared, active


def shape_match(shape: Shape, state: ParticleState, mu: float = 1.0):
    """Shape-matching deltas and the best-fit rotation for one group.

    Assembles the moment matrix from mass-weighted positions plus the
    oriented-particle term (1/5) m r^2 R R_rest^T, extracts its rotation by
    polar decomposition, and returns:
      (deltas (K,3), R (3,3), new_orientations (K,4))
    Deltas are k_S * (R (x_rest - c_rest) + c - x), scaled by mu.
    A degenerate moment matrix falls back to the shape's previous rotation.
    """
    from ..geometry import polar_decompose

    idx = shape.indices
    m = state.mass[idx]
    x = state.x[idx]
    x_rest = state.x_rest[idx]
    total = shape.total_mass
    c = (m[:, None] * x).sum(axis=0) / total
    c_rest = shape.rest_centroid

    rot = quat_to_matrix(state.q[idx])
    rot_rest = quat_to_matrix(state.q_rest[idx])
    moment = 0.2 * m * state.radius[idx] ** 2
    a = np.einsum("k,kij->ij", moment, np.einsum("kab,kcb->kac", rot, rot_rest))
    a += np.einsum("k,ki,kj->ij", m, x, x_rest)
    a -= total * np.outer(c, c_rest)

    try:
        r = polar_decompose(a)
        shape.prev_rotation = r
    except DegenerateMatrix:
        r = shape.prev_rotation
    goal = (x_rest - c_rest) @ r.T + c
    deltas = mu * shape.stiffness * (goal - x)
    new_q = quat_mul(matrix_to_quat(r), state.q_rest[idx])
    return deltas, r, new_q
