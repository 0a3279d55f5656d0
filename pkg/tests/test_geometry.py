import numpy as np
import pytest
from scipy.linalg import expm

from splatworld.errors import BehindCamera, DegenerateMatrix
from splatworld.geometry import (
    Camera,
    Plane,
    look_at,
    matrix_to_quat,
    polar_decompose,
    project,
    quat_integrate,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_to_axis_angle_rate,
    quat_to_matrix,
)

IDENT = np.array([0.0, 0.0, 0.0, 1.0])


def random_unit_quat(rng):
    return quat_normalize(rng.normal(size=4))


def skew(v):
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def random_camera(rng, width=160, height=90):
    eye = rng.normal(size=3) * 0.5 + np.array([0.0, -0.8, 0.5])
    target = rng.normal(size=3) * 0.05
    return look_at(eye, target, fx=150.0, fy=150.0, width=width, height=height)


class TestQuatIntegrate:
    def test_zero_rotation(self):
        q = quat_integrate(IDENT, np.zeros(3), 1.0 / 30.0)
        assert np.allclose(q, IDENT)

    def test_pi_about_z(self):
        q = quat_integrate(IDENT, np.array([0.0, 0.0, np.pi]), 1.0)
        expected = np.array([0.0, 0.0, 1.0, 0.0])
        assert min(np.linalg.norm(q - expected), np.linalg.norm(q + expected)) < 1e-12

    def test_matches_matrix_exponential(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            q = random_unit_quat(rng)
            w = rng.normal(size=3) * 5.0
            dt = rng.uniform(0.001, 0.1)
            got = quat_to_matrix(quat_integrate(q, w, dt))
            want = expm(skew(w * dt)) @ quat_to_matrix(q)
            assert np.max(np.abs(got - want)) < 1e-9

    def test_unit_norm(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            q = quat_integrate(random_unit_quat(rng), rng.normal(size=3), 0.01)
            assert abs(np.linalg.norm(q) - 1.0) < 1e-9

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            quat_integrate(IDENT, np.zeros(3), 0.0)


class TestQuatRate:
    def test_same_orientation_zero(self):
        rng = np.random.default_rng(9)
        q = random_unit_quat(rng)
        assert np.allclose(quat_to_axis_angle_rate(q, q, 0.01), 0.0)

    def test_analytic_quarter_turn(self):
        q1 = quat_normalize(np.array([np.sin(np.pi / 4), 0.0, 0.0, np.cos(np.pi / 4)]))
        w = quat_to_axis_angle_rate(q1, IDENT, 1.0)
        assert np.allclose(w, [np.pi / 2, 0.0, 0.0], atol=1e-12)

    def test_roundtrip_with_integrate(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            q0 = random_unit_quat(rng)
            q1 = random_unit_quat(rng)
            dt = rng.uniform(1e-3, 0.1)
            w = quat_to_axis_angle_rate(q1, q0, dt)
            back = quat_integrate(q0, w, dt)
            err = min(np.linalg.norm(back - q1), np.linalg.norm(back + q1))
            assert err < 1e-7


class TestQuatBasics:
    def test_rotate_matches_matrix(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            q = random_unit_quat(rng)
            v = rng.normal(size=3)
            assert np.allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-12)

    def test_mul_matches_matrix_product(self):
        rng = np.random.default_rng(12)
        a, b = random_unit_quat(rng), random_unit_quat(rng)
        assert np.allclose(
            quat_to_matrix(quat_mul(a, b)), quat_to_matrix(a) @ quat_to_matrix(b)
        )

    def test_matrix_roundtrip(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            q = random_unit_quat(rng)
            back = matrix_to_quat(quat_to_matrix(q))
            assert min(np.linalg.norm(back - q), np.linalg.norm(back + q)) < 1e-9

    def test_canonical_sign(self):
        q = quat_normalize(np.array([0.1, 0.2, 0.3, -0.9]))
        assert q[3] >= 0.0


class TestProject:
    def test_optical_axis(self):
        cam = Camera(np.eye(3), np.zeros(3), 150.0, 140.0, 80.0, 45.0, 160, 90)
        u, z, _ = project(cam, [0.0, 0.0, 1.0])
        assert np.allclose(u, [80.0, 45.0])
        assert z == 1.0

    def test_axis_jacobian_analytic(self):
        cam = Camera(np.eye(3), np.zeros(3), 150.0, 140.0, 80.0, 45.0, 160, 90)
        _, _, j = project(cam, [0.0, 0.0, 1.0])
        assert np.allclose(j, [[150.0, 0.0, 0.0], [0.0, 140.0, 0.0]])

    def test_behind_camera(self):
        cam = Camera(np.eye(3), np.zeros(3), 150.0, 150.0, 80.0, 45.0, 160, 90)
        with pytest.raises(BehindCamera):
            project(cam, [0.0, 0.0, -1.0])

    def test_jacobian_finite_differences(self):
        # J is with respect to the view-space point; perturb there.
        rng = np.random.default_rng(14)
        h = 1e-6
        checked = 0
        while checked < 1000:
            cam = random_camera(rng)
            x = rng.normal(size=3) * 0.2
            xv = cam.to_view(x)
            if xv[2] < 0.05:
                continue
            checked += 1

            def pix(p):
                return np.array(
                    [cam.fx * p[0] / p[2] + cam.cx, cam.fy * p[1] / p[2] + cam.cy]
                )

            _, _, j = project(cam, x)
            fd = np.zeros((2, 3))
            for k in range(3):
                dp = np.zeros(3)
                dp[k] = h
                fd[:, k] = (pix(xv + dp) - pix(xv - dp)) / (2 * h)
            scale = np.maximum(np.abs(fd), 1.0)
            assert np.max(np.abs(j - fd) / scale) < 1e-4


class TestPolarDecompose:
    def test_pure_rotation(self):
        rng = np.random.default_rng(15)
        r0 = quat_to_matrix(random_unit_quat(rng))
        assert np.allclose(polar_decompose(r0), r0, atol=1e-12)

    def test_rotation_times_stretch(self):
        rng = np.random.default_rng(16)
        r0 = quat_to_matrix(random_unit_quat(rng))
        a = r0 @ np.diag([2.0, 1.0, 0.5])
        # independent SVD oracle
        u, _, vt = np.linalg.svd(a)
        d = np.diag([1.0, 1.0, np.linalg.det(u @ vt)])
        want = u @ d @ vt
        got = polar_decompose(a)
        assert np.allclose(got, want, atol=1e-12)
        assert np.allclose(got, r0, atol=1e-9)

    def test_reflection_gets_proper_rotation(self):
        r = polar_decompose(-np.eye(3))
        assert np.linalg.det(r) > 0.99
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-8)

    def test_degenerate_raises(self):
        a = np.diag([1.0, 1.0, 1e-14])
        with pytest.raises(DegenerateMatrix):
            polar_decompose(a)

    def test_rta_symmetric(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            a = rng.normal(size=(3, 3))
            if np.min(np.linalg.svd(a, compute_uv=False)) < 1e-3:
                continue
            r = polar_decompose(a)
            s = r.T @ a
            assert np.linalg.norm(s - s.T) < 1e-7
            assert np.allclose(r.T @ r, np.eye(3), atol=1e-8)
            assert np.linalg.det(r) > 0.0


class TestPlane:
    def test_signed_distance(self):
        p = Plane([0.0, 0.0, 1.0], -0.1)
        assert np.isclose(p.signed_distance([0.0, 0.0, 0.3]), 0.2)

    def test_normalizes(self):
        with pytest.raises(ValueError):
            Plane([0.0, 0.0, 3.0], 0.0)
