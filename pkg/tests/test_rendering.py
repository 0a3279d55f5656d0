import numpy as np
import pytest

from splatworld.errors import BehindCamera, DimensionMismatch
from splatworld.geometry import Camera, quat_normalize
from splatworld.rendering import (
    GaussianSet,
    loss_rgb,
    loss_seg,
    read_png,
    read_ppm,
    render,
    screen_covariance,
    to_uint8,
    world_covariance,
    write_png,
    write_ppm,
)

W, H = 64, 64


def make_camera(fx=120.0, fy=120.0):
    return Camera(np.eye(3), np.zeros(3), fx, fy, W / 2, H / 2, W, H)


def world_point_for_pixel(cam, px, py, z):
    """World point projecting exactly to pixel-center (px+0.5, py+0.5)."""
    return np.array(
        [(px + 0.5 - cam.cx) * z / cam.fx, (py + 0.5 - cam.cy) * z / cam.fy, z]
    )


class TestWorldCovariance:
    def test_identity_isotropic(self):
        cov = world_covariance(np.array([0.0, 0.0, 0.0, 1.0]), np.full(3, 1e-3))
        assert np.allclose(cov, 1e-6 * np.eye(3))

    def test_rotation_swaps_axes(self):
        q = quat_normalize(np.array([0.0, 0.0, np.sin(np.pi / 4), np.cos(np.pi / 4)]))
        cov = world_covariance(q, np.array([2e-3, 1e-3, 1e-3]))
        assert np.allclose(np.diag(cov), [1e-6, 4e-6, 1e-6], atol=1e-15)

    def test_eigenvalues_are_squared_scales(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            q = quat_normalize(rng.normal(size=4))
            s = rng.uniform(1e-3, 1e-2, size=3)
            ev = np.sort(np.linalg.eigvalsh(world_covariance(q, s)))
            assert np.max(np.abs(ev - np.sort(s**2))) < 1e-12


class TestScreenCovariance:
    def test_isotropic_on_axis(self):
        cam = make_camera()
        sigma = 2e-3
        z = 0.8
        cov = world_covariance(np.array([0.0, 0.0, 0.0, 1.0]), np.full(3, sigma))
        sp = screen_covariance(cov, cam, [0.0, 0.0, z])
        want = np.diag(
            [(cam.fx * sigma / z) ** 2, (cam.fy * sigma / z) ** 2]
        ) + 0.3 * np.eye(2)
        assert np.allclose(sp, want, rtol=1e-9)

    def test_depth_scaling(self):
        cam = make_camera()
        cov = world_covariance(np.array([0.0, 0.0, 0.0, 1.0]), np.full(3, 2e-3))
        near = screen_covariance(cov, cam, [0.0, 0.0, 0.5]) - 0.3 * np.eye(2)
        far = screen_covariance(cov, cam, [0.0, 0.0, 1.0]) - 0.3 * np.eye(2)
        assert np.allclose(near, 4.0 * far, rtol=1e-9)

    def test_behind_camera(self):
        cam = make_camera()
        cov = np.eye(3) * 1e-6
        with pytest.raises(BehindCamera):
            screen_covariance(cov, cam, [0.0, 0.0, -0.5])


class TestRender:
    def test_empty(self):
        cam = make_camera()
        img = render(GaussianSet(np.zeros((0, 3))), cam)
        assert np.all(img.rgb == 0.0)
        assert np.all(img.alpha == 0.0)

    def test_single_opaque_gaussian_center_pixel(self):
        cam = make_camera()
        x = world_point_for_pixel(cam, 20, 30, 0.5)
        g = GaussianSet(x[None], scale=2e-3, opacity=1.0, color=[[1.0, 0.0, 0.0]])
        img = render(g, cam)
        assert np.allclose(img.rgb[30, 20], [1.0, 0.0, 0.0], atol=1e-9)
        assert img.alpha[30, 20] > 0.999

    def test_two_overlapping_hand_composited(self):
        cam = make_camera()
        front = world_point_for_pixel(cam, 32, 32, 0.5)
        back = world_point_for_pixel(cam, 32, 32, 1.0)
        g = GaussianSet(
            np.stack([front, back]),
            scale=np.array([[2e-3], [4e-3]]) * np.ones((2, 3)),
            opacity=[0.5, 1.0],
            color=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        )
        img = render(g, cam)
        # 0.5*red + (1-0.5)*1.0*blue at the shared center
        assert np.allclose(img.rgb[32, 32], [0.5, 0.0, 0.5], atol=1e-9)

    def test_opaque_dominance(self):
        cam = make_camera()
        front = world_point_for_pixel(cam, 32, 32, 0.5)
        back = world_point_for_pixel(cam, 32, 32, 1.0)
        g = GaussianSet(
            np.stack([front, back]),
            scale=np.array([[2e-3], [4e-3]]) * np.ones((2, 3)),
            opacity=[1.0, 1.0],
            color=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        )
        img = render(g, cam)
        assert np.array_equal(img.rgb[32, 32], [1.0, 0.0, 0.0])

    def test_alpha_in_unit_interval(self):
        rng = np.random.default_rng(42)
        cam = make_camera()
        g = random_scene(rng, 40)
        img = render(g, cam)
        assert np.all(img.alpha >= 0.0) and np.all(img.alpha <= 1.0)
        assert np.all(np.isfinite(img.rgb))

    def test_depth_sorting_tie_break(self):
        # two identical-depth gaussians: lower index composites first
        cam = make_camera()
        p = world_point_for_pixel(cam, 32, 32, 0.5)
        g = GaussianSet(
            np.stack([p, p]),
            scale=2e-3,
            opacity=[1.0, 1.0],
            color=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        )
        img = render(g, cam)
        assert np.array_equal(img.rgb[32, 32], [0.0, 1.0, 0.0])

    def test_bitwise_repeatable(self):
        rng = np.random.default_rng(43)
        cam = make_camera()
        g = random_scene(rng, 30)
        a = render(g, cam)
        b = render(g, cam)
        assert np.array_equal(a.rgb, b.rgb)
        assert np.array_equal(a.seg, b.seg)
        assert np.array_equal(a.alpha, b.alpha)

    def test_segmentation_channels(self):
        cam = make_camera()
        p = world_point_for_pixel(cam, 10, 10, 0.5)
        g = GaussianSet(p[None], scale=2e-3, opacity=1.0, seg=np.array([[0.0, 1.0]]))
        img = render(g, cam)
        assert img.seg.shape == (H, W, 2)
        assert img.seg[10, 10, 1] > 0.999
        assert img.seg[10, 10, 0] == 0.0


def random_scene(rng, count, seg_channels=0):
    x = np.column_stack(
        [
            rng.uniform(-0.15, 0.15, size=count),
            rng.uniform(-0.15, 0.15, size=count),
            rng.uniform(0.4, 0.9, size=count),
        ]
    )
    seg = None
    if seg_channels:
        seg = np.zeros((count, seg_channels))
        seg[np.arange(count), rng.integers(0, seg_channels, size=count)] = 1.0
    return GaussianSet(
        x,
        q=quat_normalize(rng.normal(size=(count, 4))),
        scale=rng.uniform(2e-3, 8e-3, size=(count, 3)),
        opacity=rng.uniform(0.25, 0.9, size=count),
        color=rng.uniform(0.05, 0.95, size=(count, 3)),
        seg=seg,
    )


class TestLosses:
    def test_identical_zero(self):
        img = np.ones((4, 4, 3)) * 0.3
        assert loss_rgb(img, img.copy()) == 0.0

    def test_black_vs_white(self):
        assert loss_rgb(np.zeros((2, 2, 3)), np.ones((2, 2, 3))) == 12.0

    def test_naive_loop_oracle(self):
        rng = np.random.default_rng(44)
        a = rng.random((5, 7, 3))
        b = rng.random((5, 7, 3))
        want = 0.0
        for y in range(5):
            for x in range(7):
                for c in range(3):
                    want += abs(a[y, x, c] - b[y, x, c])
        assert np.isclose(loss_rgb(a, b), want, rtol=1e-12)

    def test_mask_restricts(self):
        a = np.zeros((2, 2, 3))
        b = np.ones((2, 2, 3))
        mask = np.array([[1, 0], [0, 0]], dtype=bool)
        assert loss_rgb(a, b, mask) == 3.0

    def test_seg_fully_wrong_onehot(self):
        n = 6
        a = np.zeros((2, 3, 2))
        a[..., 0] = 1.0
        b = np.zeros((2, 3, 2))
        b[..., 1] = 1.0
        assert loss_seg(a, b) == 2 * n

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            loss_rgb(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))
        with pytest.raises(DimensionMismatch):
            loss_rgb(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), np.zeros((3, 3)))


class TestImageIO:
    def test_quantization_rule(self):
        assert to_uint8(np.array([0.0])) == 0
        assert to_uint8(np.array([1.0])) == 255
        assert to_uint8(np.array([2.0])) == 255  # clamped
        assert to_uint8(np.array([0.2])) == round(0.2 * 255)

    def test_ppm_roundtrip(self, tmp_path):
        rng = np.random.default_rng(45)
        img = rng.random((9, 13, 3))
        path = tmp_path / "x.ppm"
        write_ppm(path, img)
        back = read_ppm(path)
        assert np.array_equal(to_uint8(back), to_uint8(img))

    def test_png_roundtrip(self, tmp_path):
        rng = np.random.default_rng(46)
        img = rng.random((8, 10, 3))
        path = tmp_path / "x.png"
        write_png(path, img)
        back = read_png(path)
        assert np.array_equal(to_uint8(back), to_uint8(img))
