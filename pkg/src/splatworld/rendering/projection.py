"""Splat projection: world/screen covariances and per-camera rasterization prep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCamera
from ..geometry import Camera, quat_to_matrix
from .gaussians import GaussianSet

COV_DILATION = 0.3  # px^2 added to the screen covariance diagonal (anti-alias floor)
ALPHA_CUTOFF = 1.0 / 255.0
ELLIPSE_BOUND = 9.0  # d^T cov'^-1 d <= 9 is the 3-sigma footprint
TRANSMITTANCE_EPS = 1e-4


def world_covariance(q: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Sigma = R diag(s^2) R^T for one Gaussian or a batch."""
    r = quat_to_matrix(q)
    s2 = np.asarray(scale, dtype=float) ** 2
    return np.einsum("...ij,...j,...kj->...ik", r, s2, r)


def screen_covariance(cov: np.ndarray, cam: Camera, x: np.ndarray) -> np.ndarray:
    """2x2 screen-space covariance J V cov V^T J^T + dilation.

    Raises BehindCamera for points at or behind the near clip.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    _, z, j, valid = cam.project_many(x[None])
    if not valid[0]:
        raise BehindCamera(f"z_view={z[0]:.4f}")
    p = j[0] @ cam.rotation
    return p @ cov @ p.T + COV_DILATION * np.eye(2)


@dataclass
class SplatPrep:
    """Depth-sorted visible splats with screen-space quantities."""

    indices: np.ndarray  # (V,) into the full Gaussian set, increasing depth
    mean2d: np.ndarray  # (V, 2)
    depth: np.ndarray  # (V,)
    cov2d: np.ndarray  # (V, 3) packed s11, s12, s22
    conic: np.ndarray  # (V, 3) packed inverse
    radius: np.ndarray  # (V,) 3-sigma pixel radius
    view_t: np.ndarray  # (V, 3) view-space positions
    jac: np.ndarray  # (V, 2, 3) projection Jacobians
    view_cov: np.ndarray  # (V, 3, 3) view-space covariances
    rot_mats: np.ndarray  # (V, 3, 3) Gaussian rotations

    @property
    def count(self) -> int:
        return self.indices.size


def prepare_splats(gaussians: GaussianSet, cam: Camera) -> SplatPrep:
    """Project, cull, and depth-sort the Gaussians for one camera."""
    u, z, j, valid = cam.project_many(gaussians.x)
    a = gaussians.opacity
    visible = valid & (a >= ALPHA_CUTOFF)
    idx = np.flatnonzero(visible)
    # stable sort on depth keeps index order for ties (determinism)
    order = np.argsort(z[idx], kind="stable")
    idx = idx[order]

    rot = quat_to_matrix(gaussians.q[idx])
    s2 = gaussians.scale[idx] ** 2
    cov_w = np.einsum("vij,vj,vkj->vik", rot, s2, rot)
    view_cov = np.einsum("ij,vjk,lk->vil", cam.rotation, cov_w, cam.rotation)
    jac = j[idx]
    cov2 = np.einsum("vab,vbc,vdc->vad", jac, view_cov, jac)
    s11 = cov2[:, 0, 0] + COV_DILATION
    s12 = cov2[:, 0, 1]
    s22 = cov2[:, 1, 1] + COV_DILATION
    det = s11 * s22 - s12 * s12
    conic = np.stack([s22 / det, -s12 / det, s11 / det], axis=-1)
    mid = 0.5 * (s11 + s22)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radius = 3.0 * np.sqrt(lam_max)
    return SplatPrep(
        indices=idx,
        mean2d=u[idx],
        depth=z[idx],
        cov2d=np.stack([s11, s12, s22], axis=-1),
        conic=conic,
        radius=radius,
        view_t=cam.to_view(gaussians.x[idx]),
        jac=jac,
        view_cov=view_cov,
        rot_mats=rot,
    )
