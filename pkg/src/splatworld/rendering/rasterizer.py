"""Software splatting rasterizer: forward compositing and analytic gradients.

Per-pixel work runs in numba kernels. Candidate Gaussians are binned per
pixel by their 3-sigma bounding boxes in depth order, so each pixel walks a
front-to-back list. The backward pass re-traverses each pixel and builds the
suffix-contribution recurrence, which needs no division by (1 - alpha) and
is therefore stable for fully opaque splats.

Determinism: the forward pass is parallel over rows (pixels independent);
the backward pass accumulates into a fixed number of row-block buffers that
are merged in block order, so results do not depend on the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from ..errors import DimensionMismatch
from ..geometry import Camera
from .gaussians import GaussianSet
from .projection import SplatPrep, prepare_splats

ALL_PARAMS = frozenset({"position", "rotation", "scale", "opacity", "color"})

_NBLOCKS = 16
# transmittance falls below 1e-4 after at most ~2350 contributions of
# alpha >= 1/255, so a fixed per-pixel stack suffices
_MAX_CONTRIB = 2600


@dataclass
class RenderedImage:
    rgb: np.ndarray  # (H, W, 3)
    seg: np.ndarray  # (H, W, K)
    alpha: np.ndarray  # (H, W)

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]


@dataclass
class GaussianGrads:
    x: np.ndarray  # (M, 3)
    q: np.ndarray  # (M, 4)
    s: np.ndarray  # (M, 3)
    a: np.ndarray  # (M,)
    c: np.ndarray  # (M, 3)

    @staticmethod
    def zeros(m: int) -> "GaussianGrads":
        return GaussianGrads(
            np.zeros((m, 3)), np.zeros((m, 4)), np.zeros((m, 3)), np.zeros(m), np.zeros((m, 3))
        )

    def add_(self, other: "GaussianGrads"):
        self.x += other.x
        self.q += other.q
        self.s += other.s
        self.a += other.a
        self.c += other.c


@njit(cache=True)
def _bin_splats(mean2d, radius, width, height):
    v = mean2d.shape[0]
    x0 = np.empty(v, np.int64)
    x1 = np.empty(v, np.int64)
    y0 = np.empty(v, np.int64)
    y1 = np.empty(v, np.int64)
    starts = np.zeros(width * height + 1, np.int64)
    for i in range(v):
        r = radius[i]
        xa = int(np.floor(mean2d[i, 0] - r))
        xb = int(np.ceil(mean2d[i, 0] + r))
        ya = int(np.floor(mean2d[i, 1] - r))
        yb = int(np.ceil(mean2d[i, 1] + r))
        xa = max(xa, 0)
        ya = max(ya, 0)
        xb = min(xb, width - 1)
        yb = min(yb, height - 1)
        x0[i], x1[i], y0[i], y1[i] = xa, xb, ya, yb
        if xa > xb or ya > yb:
            continue
        for y in range(ya, yb + 1):
            row = y * width
            for x in range(xa, xb + 1):
                starts[row + x + 1] += 1
    for p in range(1, starts.size):
        starts[p] += starts[p - 1]
    data = np.empty(starts[-1], np.int64)
    cursor = starts[:-1].copy()
    for i in range(v):  # depth order: per-pixel lists come out sorted
        if x0[i] > x1[i] or y0[i] > y1[i]:
            continue
        for y in range(y0[i], y1[i] + 1):
            row = y * width
            for x in range(x0[i], x1[i] + 1):
                data[cursor[row + x]] = i
                cursor[row + x] += 1
    return starts, data


@njit(cache=True, parallel=True)
def _forward_kernel(
    starts, data, mean2d, conic, alpha_a, color, seg, width, height, out_rgb, out_seg, out_alpha
):
    nseg = seg.shape[1]
    for y in prange(height):
        segacc = np.empty(nseg)
        for x in range(width):
            pid = y * width + x
            px = x + 0.5
            py = y + 0.5
            t = 1.0
            cr = 0.0
            cg = 0.0
            cb = 0.0
            for c in range(nseg):
                segacc[c] = 0.0
            for k in range(starts[pid], starts[pid + 1]):
                gi = data[k]
                dx = px - mean2d[gi, 0]
                dy = py - mean2d[gi, 1]
                gval = (
                    conic[gi, 0] * dx * dx
                    + 2.0 * conic[gi, 1] * dx * dy
                    + conic[gi, 2] * dy * dy
                )
                if gval > 9.0 or gval < 0.0:
                    continue
                alpha = alpha_a[gi] * np.exp(-gval)
                if alpha < 1.0 / 255.0:
                    continue
                w = alpha * t
                cr += w * color[gi, 0]
                cg += w * color[gi, 1]
                cb += w * color[gi, 2]
                for c in range(nseg):
                    segacc[c] += w * seg[gi, c]
                t *= 1.0 - alpha
                if t < 1e-4:
                    break
            out_rgb[y, x, 0] = cr
            out_rgb[y, x, 1] = cg
            out_rgb[y, x, 2] = cb
            for c in range(nseg):
                out_seg[y, x, c] = segacc[c]
            out_alpha[y, x] = 1.0 - t


@njit(cache=True, parallel=True)
def _backward_kernel(
    starts,
    data,
    mean2d,
    conic,
    alpha_a,
    color,
    seg,
    obs_rgb,
    obs_seg,
    use_seg,
    mask,
    width,
    height,
    rows_per_block,
    g_mean2d,
    g_cov2d,
    g_a,
    g_c,
):
    nblocks = g_mean2d.shape[0]
    nseg = seg.shape[1]
    for blk in prange(nblocks):
        y_lo = blk * rows_per_block
        y_hi = min(height, y_lo + rows_per_block)
        st_gi = np.empty(_MAX_CONTRIB, np.int64)
        st_alpha = np.empty(_MAX_CONTRIB)
        st_t = np.empty(_MAX_CONTRIB)
        st_eg = np.empty(_MAX_CONTRIB)
        st_e1 = np.empty(_MAX_CONTRIB)
        st_e2 = np.empty(_MAX_CONTRIB)
        segacc = np.empty(nseg)
        sgnseg = np.empty(nseg)
        wseg = np.empty(nseg)
        for y in range(y_lo, y_hi):
            for x in range(width):
                if mask[y, x] == 0:
                    continue
                pid = y * width + x
                px = x + 0.5
                py = y + 0.5
                t = 1.0
                cr = 0.0
                cg = 0.0
                cb = 0.0
                for c in range(nseg):
                    segacc[c] = 0.0
                n = 0
                for k in range(starts[pid], starts[pid + 1]):
                    gi = data[k]
                    dx = px - mean2d[gi, 0]
                    dy = py - mean2d[gi, 1]
                    gval = (
                        conic[gi, 0] * dx * dx
                        + 2.0 * conic[gi, 1] * dx * dy
                        + conic[gi, 2] * dy * dy
                    )
                    if gval > 9.0 or gval < 0.0:
                        continue
                    eg = np.exp(-gval)
                    alpha = alpha_a[gi] * eg
                    if alpha < 1.0 / 255.0:
                        continue
                    if n < _MAX_CONTRIB:
                        st_gi[n] = gi
                        st_alpha[n] = alpha
                        st_t[n] = t
                        st_eg[n] = eg
                        st_e1[n] = conic[gi, 0] * dx + conic[gi, 1] * dy
                        st_e2[n] = conic[gi, 1] * dx + conic[gi, 2] * dy
                        n += 1
                    w = alpha * t
                    cr += w * color[gi, 0]
                    cg += w * color[gi, 1]
                    cb += w * color[gi, 2]
                    for c in range(nseg):
                        segacc[c] += w * seg[gi, c]
                    t *= 1.0 - alpha
                    if t < 1e-4:
                        break
                if n == 0:
                    continue
                # L1 subgradient; defined as 0 at exact agreement
                dr = cr - obs_rgb[y, x, 0]
                dg = cg - obs_rgb[y, x, 1]
                db = cb - obs_rgb[y, x, 2]
                sr = 0.0 if dr == 0.0 else (1.0 if dr > 0.0 else -1.0)
                sg = 0.0 if dg == 0.0 else (1.0 if dg > 0.0 else -1.0)
                sb = 0.0 if db == 0.0 else (1.0 if db > 0.0 else -1.0)
                if use_seg:
                    for c in range(nseg):
                        ds = segacc[c] - obs_seg[y, x, c]
                        sgnseg[c] = 0.0 if ds == 0.0 else (1.0 if ds > 0.0 else -1.0)
                wr = 0.0
                wg = 0.0
                wb = 0.0
                for c in range(nseg):
                    wseg[c] = 0.0
                for m in range(n - 1, -1, -1):
                    gi = st_gi[m]
                    alpha = st_alpha[m]
                    tm = st_t[m]
                    awt = alpha * tm
                    dlda = (
                        sr * tm * (color[gi, 0] - wr)
                        + sg * tm * (color[gi, 1] - wg)
                        + sb * tm * (color[gi, 2] - wb)
                    )
                    if use_seg:
                        for c in range(nseg):
                            dlda += sgnseg[c] * tm * (seg[gi, c] - wseg[c])
                    g_c[blk, gi, 0] += sr * awt
                    g_c[blk, gi, 1] += sg * awt
                    g_c[blk, gi, 2] += sb * awt
                    g_a[blk, gi] += dlda * st_eg[m]
                    beta = -dlda * alpha
                    e1 = st_e1[m]
                    e2 = st_e2[m]
                    g_mean2d[blk, gi, 0] += -2.0 * beta * e1
                    g_mean2d[blk, gi, 1] += -2.0 * beta * e2
                    g_cov2d[blk, gi, 0] += -beta * e1 * e1
                    g_cov2d[blk, gi, 1] += -2.0 * beta * e1 * e2
                    g_cov2d[blk, gi, 2] += -beta * e2 * e2
                    wr = color[gi, 0] * alpha + (1.0 - alpha) * wr
                    wg = color[gi, 1] * alpha + (1.0 - alpha) * wg
                    wb = color[gi, 2] * alpha + (1.0 - alpha) * wb
                    for c in range(nseg):
                        wseg[c] = seg[gi, c] * alpha + (1.0 - alpha) * wseg[c]


def render(gaussians: GaussianSet, cam: Camera, prep: SplatPrep | None = None) -> RenderedImage:
    """Composite the Gaussian set front to back into an RGB/seg/alpha image.

    Background is black with alpha 0. An empty set gives an empty image.
    """
    h, w = cam.height, cam.width
    k = gaussians.seg_channels
    rgb = np.zeros((h, w, 3))
    seg = np.zeros((h, w, k))
    alpha = np.zeros((h, w))
    if gaussians.count == 0:
        return RenderedImage(rgb, seg, alpha)
    if prep is None:
        prep = prepare_splats(gaussians, cam)
    if prep.count == 0:
        return RenderedImage(rgb, seg, alpha)
    starts, data = _bin_splats(prep.mean2d, prep.radius, w, h)
    _forward_kernel(
        starts,
        data,
        prep.mean2d,
        prep.conic,
        gaussians.opacity[prep.indices],
        gaussians.color[prep.indices],
        gaussians.seg[prep.indices],
        w,
        h,
        rgb,
        seg,
        alpha,
    )
    return RenderedImage(rgb, seg, alpha)


def backward(
    gaussians: GaussianSet,
    cam: Camera,
    observed_rgb: np.ndarray,
    observed_seg: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    which_params: frozenset | set = ALL_PARAMS,
) -> GaussianGrads:
    """Gradients of the L1 photometric (+ optional segmentation) loss.

    Gradients are with respect to position, rotation quaternion, scale,
    opacity (actual value, not its logit) and color. Groups outside
    which_params are zero, as are Gaussians culled from every pixel.
    """
    h, w = cam.height, cam.width
    observed_rgb = np.ascontiguousarray(observed_rgb, dtype=float)
    if observed_rgb.shape != (h, w, 3):
        raise DimensionMismatch(
            f"observed image {observed_rgb.shape} vs camera {(h, w, 3)}"
        )
    use_seg = observed_seg is not None
    if use_seg:
        observed_seg = np.ascontiguousarray(observed_seg, dtype=float)
        if observed_seg.shape != (h, w, gaussians.seg_channels):
            raise DimensionMismatch(
                f"observed seg {observed_seg.shape} vs {(h, w, gaussians.seg_channels)}"
            )
    else:
        observed_seg = np.zeros((h, w, gaussians.seg_channels))
    if mask is None:
        mask_u8 = np.ones((h, w), dtype=np.uint8)
    else:
        mask = np.asarray(mask)
        if mask.shape != (h, w):
            raise DimensionMismatch(f"mask {mask.shape} vs camera {(h, w)}")
        mask_u8 = np.ascontiguousarray(mask != 0, dtype=np.uint8)

    grads = GaussianGrads.zeros(gaussians.count)
    if gaussians.count == 0:
        return grads
    prep = prepare_splats(gaussians, cam)
    v = prep.count
    if v == 0:
        return grads
    starts, data = _bin_splats(prep.mean2d, prep.radius, w, h)

    nblocks = min(_NBLOCKS, h)
    rows_per_block = (h + nblocks - 1) // nblocks
    g_mean2d = np.zeros((nblocks, v, 2))
    g_cov2d = np.zeros((nblocks, v, 3))
    g_a = np.zeros((nblocks, v))
    g_c = np.zeros((nblocks, v, 3))
    _backward_kernel(
        starts,
        data,
        prep.mean2d,
        prep.conic,
        gaussians.opacity[prep.indices],
        gaussians.color[prep.indices],
        gaussians.seg[prep.indices],
        observed_rgb,
        observed_seg,
        use_seg,
        mask_u8,
        w,
        h,
        rows_per_block,
        g_mean2d,
        g_cov2d,
        g_a,
        g_c,
    )
    grad_u = g_mean2d.sum(axis=0)
    grad_cov = g_cov2d.sum(axis=0)
    grad_a_v = g_a.sum(axis=0)
    grad_c_v = g_c.sum(axis=0)

    gx, gq, gs = _chain_to_world(gaussians, cam, prep, grad_u, grad_cov)

    idx = prep.indices
    if "position" in which_params:
        grads.x[idx] = gx
    if "rotation" in which_params:
        grads.q[idx] = gq
    if "scale" in which_params:
        grads.s[idx] = gs
    if "opacity" in which_params:
        grads.a[idx] = grad_a_v
    if "color" in which_params:
        grads.c[idx] = grad_c_v
    return grads


def _chain_to_world(gaussians, cam, prep, grad_u, grad_cov):
    """Screen-space mean/covariance gradients -> world position, quat, scale."""
    # symmetric 2x2 gradient matrix; the packed s12 slot carries both
    # off-diagonal entries, so each gets half
    gbar = np.empty((prep.count, 2, 2))
    gbar[:, 0, 0] = grad_cov[:, 0]
    gbar[:, 0, 1] = 0.5 * grad_cov[:, 1]
    gbar[:, 1, 0] = 0.5 * grad_cov[:, 1]
    gbar[:, 1, 1] = grad_cov[:, 2]

    jac = prep.jac
    tv = prep.view_t
    # pixel-mean path: u depends on the view position through J itself
    grad_t = np.einsum("vij,vi->vj", jac, grad_u)

    # covariance path: cov' = J M J^T with J a function of the view position
    dldj = 2.0 * np.einsum("vab,vbc,vcd->vad", gbar, jac, prep.view_cov)
    fx, fy = cam.fx, cam.fy
    tz = tv[:, 2]
    inv_z2 = 1.0 / (tz * tz)
    inv_z3 = inv_z2 / tz
    grad_t[:, 0] += dldj[:, 0, 2] * (-fx * inv_z2)
    grad_t[:, 1] += dldj[:, 1, 2] * (-fy * inv_z2)
    grad_t[:, 2] += (
        dldj[:, 0, 0] * (-fx * inv_z2)
        + dldj[:, 1, 1] * (-fy * inv_z2)
        + dldj[:, 0, 2] * (2.0 * fx * tv[:, 0] * inv_z3)
        + dldj[:, 1, 2] * (2.0 * fy * tv[:, 1] * inv_z3)
    )
    gx = grad_t @ cam.rotation

    # world covariance gradient H = P^T Gbar P, P = J R_cam
    p = np.einsum("vab,bc->vac", jac, cam.rotation)
    hmat = np.einsum("vai,vab,vbj->vij", p, gbar, p)

    rot = prep.rot_mats
    s = gaussians.scale[prep.indices]
    rhr = np.einsum("vji,vjk,vkl->vil", rot, hmat, rot)
    gs = 2.0 * s * np.stack([rhr[:, 0, 0], rhr[:, 1, 1], rhr[:, 2, 2]], axis=-1)

    grad_r = 2.0 * np.einsum("vij,vjk->vik", hmat, rot) * (s**2)[:, None, :]
    q = gaussians.q[prep.indices]
    gq = _quat_grad_from_rotation_grad(q, grad_r)
    return gx, gq, gs


def _quat_grad_from_rotation_grad(q, gr):
    """d(loss)/dq for R(q) with q unit (includes normalization projection)."""
    x, y, z, w = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    g01, g10 = gr[:, 0, 1], gr[:, 1, 0]
    g02, g20 = gr[:, 0, 2], gr[:, 2, 0]
    g12, g21 = gr[:, 1, 2], gr[:, 2, 1]
    g00, g11, g22 = gr[:, 0, 0], gr[:, 1, 1], gr[:, 2, 2]
    gx = 2 * y * (g01 + g10) + 2 * z * (g02 + g20) - 4 * x * (g11 + g22) + 2 * w * (g21 - g12)
    gy = 2 * x * (g01 + g10) + 2 * z * (g12 + g21) - 4 * y * (g00 + g22) + 2 * w * (g02 - g20)
    gz = 2 * x * (g02 + g20) + 2 * y * (g12 + g21) - 4 * z * (g00 + g11) + 2 * w * (g10 - g01)
    gw = 2 * x * (g21 - g12) + 2 * y * (g02 - g20) + 2 * z * (g10 - g01)
    gq = np.stack([gx, gy, gz, gw], axis=-1)
    # project out the norm direction (R is invariant to |q|)
    return gq - q * np.sum(q * gq, axis=-1, keepdims=True)
