"""Core geometry: quaternions, pinhole cameras, planes, polar decomposition.

Conventions:
- Quaternions are stored as (x, y, z, w), unit norm, and canonicalized to
  w >= 0 after every public operation. Rotations act on column vectors as
  v' = R(q) v, and products compose as R(q1 * q2) = R(q1) R(q2).
- Cameras hold a world->view rigid transform. The view frame is the usual
  pinhole frame: +z forward, +x right, +y down; pixels u = (fx*x/z + cx,
  fy*y/z + cy).
- Planes are (n, d) with signed distance n.x + d (n unit).

All functions accept a single item or a leading batch dimension and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, DegenerateMatrix

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])

_EPS_ANGULAR = 1e-12


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize and canonicalize (w >= 0) one quaternion or a batch."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    out = q / n
    # sign canonicalization keeps round-trips deterministic
    flip = out[..., 3:4] < 0.0
    return np.where(flip, -out, out)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b (xyzw layout), broadcasting over batches."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay, az, aw = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bx, by, bz, bw = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., :3] *= -1.0
    return out


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    u = q[..., :3]
    w = q[..., 3:4]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion; batched input gives (..., 3, 3)."""
    q = np.asarray(q, dtype=float)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1.0 - 2.0 * (yy + zz)
    m[..., 0, 1] = 2.0 * (xy - wz)
    m[..., 0, 2] = 2.0 * (xz + wy)
    m[..., 1, 0] = 2.0 * (xy + wz)
    m[..., 1, 1] = 1.0 - 2.0 * (xx + zz)
    m[..., 1, 2] = 2.0 * (yz - wx)
    m[..., 2, 0] = 2.0 * (xz - wy)
    m[..., 2, 1] = 2.0 * (yz + wx)
    m[..., 2, 2] = 1.0 - 2.0 * (xx + yy)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Quaternion of a rotation matrix (Shepperd's method), batched."""
    m = np.asarray(m, dtype=float)
    batch = m.shape[:-2]
    q = np.empty(batch + (4,))
    t = np.trace(m, axis1=-2, axis2=-1)

    # Four numerically-stable branches keyed on the largest diagonal entry.
    c0 = t > 0.0
    c1 = (~c0) & (m[..., 0, 0] >= m[..., 1, 1]) & (m[..., 0, 0] >= m[..., 2, 2])
    c2 = (~c0) & (~c1) & (m[..., 1, 1] >= m[..., 2, 2])
    c3 = ~(c0 | c1 | c2)

    s = np.sqrt(np.where(c0, t + 1.0, 1.0)) * 2.0
    q[..., 3] = np.where(c0, 0.25 * s, 0.0)
    q[..., 0] = np.where(c0, (m[..., 2, 1] - m[..., 1, 2]) / s, 0.0)
    q[..., 1] = np.where(c0, (m[..., 0, 2] - m[..., 2, 0]) / s, 0.0)
    q[..., 2] = np.where(c0, (m[..., 1, 0] - m[..., 0, 1]) / s, 0.0)

    s = np.sqrt(np.where(c1, 1.0 + m[..., 0, 0] - m[..., 1, 1] - m[..., 2, 2], 1.0)) * 2.0
    q[..., 3] = np.where(c1, (m[..., 2, 1] - m[..., 1, 2]) / s, q[..., 3])
    q[..., 0] = np.where(c1, 0.25 * s, q[..., 0])
    q[..., 1] = np.where(c1, (m[..., 0, 1] + m[..., 1, 0]) / s, q[..., 1])
    q[..., 2] = np.where(c1, (m[..., 0, 2] + m[..., 2, 0]) / s, q[..., 2])

    s = np.sqrt(np.where(c2, 1.0 + m[..., 1, 1] - m[..., 0, 0] - m[..., 2, 2], 1.0)) * 2.0
    q[..., 3] = np.where(c2, (m[..., 0, 2] - m[..., 2, 0]) / s, q[..., 3])
    q[..., 0] = np.where(c2, (m[..., 0, 1] + m[..., 1, 0]) / s, q[..., 0])
    q[..., 1] = np.where(c2, 0.25 * s, q[..., 1])
    q[..., 2] = np.where(c2, (m[..., 1, 2] + m[..., 2, 1]) / s, q[..., 2])

    s = np.sqrt(np.where(c3, 1.0 + m[..., 2, 2] - m[..., 0, 0] - m[..., 1, 1], 1.0)) * 2.0
    q[..., 3] = np.where(c3, (m[..., 1, 0] - m[..., 0, 1]) / s, q[..., 3])
    q[..., 0] = np.where(c3, (m[..., 0, 2] + m[..., 2, 0]) / s, q[..., 0])
    q[..., 1] = np.where(c3, (m[..., 1, 2] + m[..., 2, 1]) / s, q[..., 1])
    q[..., 2] = np.where(c3, 0.25 * s, q[..., 2])

    return quat_normalize(q)


def quat_from_two_vectors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shortest-arc rotation taking direction a to direction b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = np.cross(a, b)
    d = float(a @ b)
    if d < -1.0 + 1e-12:  # opposite: rotate pi about any perpendicular axis
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-9:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        perp /= np.linalg.norm(perp)
        return quat_normalize(np.array([perp[0], perp[1], perp[2], 0.0]))
    return quat_normalize(np.array([c[0], c[1], c[2], 1.0 + d]))


def quat_integrate(q: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    """Advance orientation(s) q by angular velocity w (rad/s) over dt seconds.

    Applies the world-frame rotation delta [axis*sin(|w|dt/2), cos(|w|dt/2)]
    on the left. |w| below 1e-12 returns q unchanged (after normalization).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    speed = np.linalg.norm(w, axis=-1, keepdims=True)
    half = 0.5 * speed * dt
    # guard the axis division; the result is masked out for tiny |w|
    axis = w / np.where(speed < _EPS_ANGULAR, 1.0, speed)
    dq = np.concatenate([axis * np.sin(half), np.cos(half)], axis=-1)
    rotated = quat_normalize(quat_mul(dq, q))
    still = np.broadcast_to(speed < _EPS_ANGULAR, rotated.shape)
    return np.where(still, quat_normalize(q), rotated)


def quat_to_axis_angle_rate(q1: np.ndarray, q0: np.ndarray, dt: float) -> np.ndarray:
    """Angular velocity w such that integrating q0 by w over dt lands on q1.

    Uses the left-relative rotation q1 * q0^-1 with the shortest arc.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rel = quat_mul(np.asarray(q1, dtype=float), quat_conjugate(q0))
    rel = quat_normalize(rel)  # also forces w >= 0, i.e. angle <= pi
    vec = rel[..., :3]
    sin_half = np.linalg.norm(vec, axis=-1, keepdims=True)
    cos_half = rel[..., 3:4]
    angle = 2.0 * np.arctan2(sin_half, cos_half)
    axis = vec / np.where(sin_half < _EPS_ANGULAR, 1.0, sin_half)
    w = axis * angle / dt
    return np.where(sin_half < _EPS_ANGULAR, np.zeros_like(w), w)


def polar_decompose(a: np.ndarray) -> np.ndarray:
    """Closest proper rotation R to matrix a (minimizes ||a - R S||, S SPD).

    SVD-based with a determinant sign fix so det(R) = +1 even for
    reflections. Raises DegenerateMatrix when the smallest singular value
    is below 1e-10; callers typically fall back to the previous rotation.
    Batched input (..., 3, 3) is supported.
    """
    a = np.asarray(a, dtype=float)
    u, s, vt = np.linalg.svd(a)
    if np.any(s[..., -1] < 1e-10):
        raise DegenerateMatrix("singular values too small for polar decomposition")
    det = np.linalg.det(u @ vt)
    u = u.copy()
    u[..., :, 2] *= np.sign(det)[..., None]
    return u @ vt


@dataclass
class Plane:
    """Infinite plane with unit normal n and offset d: n.x + d = 0."""

    n: np.ndarray
    d: float

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=float)
        norm = np.linalg.norm(self.n)
        if not np.isclose(norm, 1.0, atol=1e-6):
            raise ValueError("plane normal must be unit length")
        self.n = self.n / norm
        self.d = float(self.d)

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.n + self.d


@dataclass
class Camera:
    """Calibrated pinhole camera with a world->view rigid transform."""

    rotation: np.ndarray  # (3, 3) world->view
    translation: np.ndarray  # (3,)
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.01
    name: str = ""

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    def to_view(self, x: np.ndarray) -> np.ndarray:
        """World point(s) expressed in the view frame."""
        return np.asarray(x, dtype=float) @ self.rotation.T + self.translation

    def project_many(self, x: np.ndarray):
        """Vectorized projection of (N, 3) world points.

        Returns (u (N,2), z (N,), J (N,2,3) view-space Jacobians, valid (N,)).
        Points behind the near clip get valid=False instead of raising.
        """
        xv = self.to_view(np.atleast_2d(x))
        z = xv[:, 2]
        valid = z > self.near
        zs = np.where(valid, z, 1.0)
        u = np.stack(
            [self.fx * xv[:, 0] / zs + self.cx, self.fy * xv[:, 1] / zs + self.cy],
            axis=-1,
        )
        j = np.zeros((xv.shape[0], 2, 3))
        j[:, 0, 0] = self.fx / zs
        j[:, 0, 2] = -self.fx * xv[:, 0] / zs**2
        j[:, 1, 1] = self.fy / zs
        j[:, 1, 2] = -self.fy * xv[:, 1] / zs**2
        return u, z, j, valid


def project(cam: Camera, x: np.ndarray):
    """Project one world point.

    Returns (u (2,), z_view, J (2,3)) where J is the Jacobian of the pixel
    coordinates with respect to the view-space point. Raises BehindCamera
    when the point is at or behind the near clip.
    """
    u, z, j, valid = cam.project_many(np.asarray(x, dtype=float).reshape(1, 3))
    if not valid[0]:
        raise BehindCamera(f"z_view={z[0]:.4f} <= near clip {cam.near}")
    return u[0], float(z[0]), j[0]


def look_at(
    eye: np.ndarray,
    target: np.ndarray,
    up: np.ndarray = (0.0, 0.0, 1.0),
    *,
    fx: float,
    fy: float,
    width: int,
    height: int,
    name: str = "",
) -> Camera:
    """Camera at `eye` looking toward `target` (view +z along the gaze)."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=float))
    nr = np.linalg.norm(right)
    if nr < 1e-9:  # gaze parallel to up: pick an arbitrary right vector
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        nr = np.linalg.norm(right)
    right = right / nr
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd], axis=0)
    return Camera(
        rotation=rot,
        translation=-rot @ eye,
        fx=fx,
        fy=fy,
        cx=width / 2.0,
        cy=height / 2.0,
        width=width,
        height=height,
        name=name,
    )
