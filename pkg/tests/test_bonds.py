import numpy as np
import pytest

from splatworld.geometry import quat_conjugate, quat_mul, quat_normalize, quat_rotate
from splatworld.model import EmbodiedModel, ObjectMeta, attach_bonds
from splatworld.physics import ParticleState
from splatworld.rendering import GaussianSet


def make_model(particle_x, gauss_x, threshold=1.0, particle_q=None, gauss_q=None):
    particles = ParticleState(particle_x, radius=0.01, mass=0.1)
    if particle_q is not None:
        particles.q = np.asarray(particle_q, dtype=float).reshape(-1, 4)
        particles.q_rest = particles.q.copy()
    g = GaussianSet(gauss_x, q=gauss_q)
    parent, offset, rotation = attach_bonds(g, particles.x, particles.q, threshold)
    g.parent = parent
    return EmbodiedModel(particles, [], g, offset, rotation, [ObjectMeta("o", 0)])


class TestAttachBonds:
    def test_gaussian_at_particle_center(self):
        rng = np.random.default_rng(61)
        pq = quat_normalize(rng.normal(size=4))
        gq = quat_normalize(rng.normal(size=4))
        particles = ParticleState(np.array([[0.1, 0.2, 0.3]]), 0.01, 0.1)
        particles.q = pq[None].copy()
        g = GaussianSet(np.array([[0.1, 0.2, 0.3]]), q=gq[None])
        parent, offset, rotation = attach_bonds(g, particles.x, particles.q, 0.05)
        assert parent[0] == 0
        assert np.allclose(offset[0], 0.0, atol=1e-12)
        assert np.allclose(rotation[0], quat_mul(quat_conjugate(pq), g.q[0]), atol=1e-12)

    def test_equidistant_tie_lowest_index(self):
        px = np.zeros((10, 3))
        px[:, 1] = 5.0  # park everything far away
        px[3] = [0.0, 0.0, 0.0]
        px[7] = [0.1, 0.0, 0.0]
        gx = np.array([[0.05, 0.0, 0.0]])  # exactly between particles 3 and 7
        g = GaussianSet(gx)
        particles = ParticleState(px, 0.01, 0.1)
        parent, _, _ = attach_bonds(g, particles.x, particles.q, 10.0)
        assert parent[0] == 3  # not 7: distance ties break to the lower index

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(62)
        px = rng.uniform(-0.1, 0.1, size=(40, 3))
        gx = rng.uniform(-0.12, 0.12, size=(200, 3))
        particles = ParticleState(px, 0.01, 0.1)
        g = GaussianSet(gx)
        threshold = 0.04
        parent, _, _ = attach_bonds(g, particles.x, particles.q, threshold)
        for j in range(200):
            best, best_d = -1, np.inf
            for i in range(40):
                d = np.linalg.norm(gx[j] - px[i])
                if d < best_d:
                    best, best_d = i, d
            want = best if best_d <= threshold else -1
            assert parent[j] == want

    def test_beyond_threshold_unbonded(self):
        particles = ParticleState(np.zeros((1, 3)), 0.01, 0.1)
        g = GaussianSet(np.array([[1.0, 0.0, 0.0]]))
        parent, _, _ = attach_bonds(g, particles.x, particles.q, 0.5)
        assert parent[0] == -1

    def test_empty_particles_rejected(self):
        g = GaussianSet(np.zeros((1, 3)))
        with pytest.raises(ValueError):
            attach_bonds(g, np.zeros((0, 3)), np.zeros((0, 4)), 1.0)


class TestApplyBonds:
    def test_translation_carries_gaussians(self):
        model = make_model(np.zeros((1, 3)), np.array([[0.01, 0.0, 0.0]]))
        t = np.array([0.3, -0.1, 0.2])
        model.particles.x[0] += t
        model.apply_bonds()
        assert np.allclose(model.gaussians.x[0], [0.31, -0.1, 0.2], atol=1e-15)

    def test_rotation_rotates_offsets_and_premultiplies(self):
        qz90 = quat_normalize(np.array([0.0, 0.0, np.sin(np.pi / 4), np.cos(np.pi / 4)]))
        model = make_model(np.zeros((1, 3)), np.array([[0.01, 0.0, 0.0]]))
        model.particles.q[0] = qz90
        model.apply_bonds()
        assert np.allclose(model.gaussians.x[0], [0.0, 0.01, 0.0], atol=1e-12)
        assert np.allclose(
            model.gaussians.q[0], quat_mul(qz90, model.bond_rot[0]), atol=1e-12
        )

    def test_relative_transform_invariant(self):
        rng = np.random.default_rng(63)
        model = make_model(
            rng.uniform(-0.05, 0.05, size=(5, 3)),
            rng.uniform(-0.06, 0.06, size=(30, 3)),
            gauss_q=quat_normalize(rng.normal(size=(30, 4))),
        )
        for _ in range(10):
            model.particles.x += rng.normal(scale=0.02, size=(5, 3))
            model.particles.q = quat_normalize(rng.normal(size=(5, 4)))
            model.apply_bonds()
            g = model.gaussians
            p = g.parent
            off = quat_rotate(
                quat_conjugate(model.particles.q[p]), g.x - model.particles.x[p]
            )
            assert np.max(np.abs(off - model.bond_offset)) < 1e-12
            rel = quat_mul(quat_conjugate(model.particles.q[p]), g.q)
            flip = np.sign(np.sum(rel * model.bond_rot, axis=1))[:, None]
            assert np.max(np.abs(rel * flip - model.bond_rot)) < 1e-12

    def test_unbonded_untouched(self):
        particles = ParticleState(np.zeros((1, 3)), 0.01, 0.1)
        g = GaussianSet(np.array([[0.5, 0.5, 0.5], [0.0, 0.0, 0.01]]))
        parent, offset, rotation = attach_bonds(g, particles.x, particles.q, 0.05)
        g.parent = parent
        model = EmbodiedModel(particles, [], g, offset, rotation, [ObjectMeta("o", 0)])
        model.particles.x[0] += [1.0, 0.0, 0.0]
        model.apply_bonds()
        assert np.allclose(model.gaussians.x[0], [0.5, 0.5, 0.5])
        assert np.allclose(model.gaussians.x[1], [1.0, 0.0, 0.01])


class TestSerialization:
    def test_roundtrip(self):
        rng = np.random.default_rng(64)
        model = make_model(
            rng.uniform(-0.05, 0.05, size=(4, 3)),
            rng.uniform(-0.06, 0.06, size=(12, 3)),
            gauss_q=quat_normalize(rng.normal(size=(12, 4))),
        )
        model.gaussians.seg = np.eye(12, 2)
        text = model.to_json()
        back = EmbodiedModel.from_json(text)
        assert np.array_equal(back.particles.x, model.particles.x)
        assert np.array_equal(back.particles.mass, model.particles.mass)
        assert np.array_equal(back.gaussians.x, model.gaussians.x)
        assert np.array_equal(back.gaussians.parent, model.gaussians.parent)
        assert np.array_equal(back.bond_offset, model.bond_offset)
        assert np.allclose(back.gaussians.opacity, model.gaussians.opacity, atol=1e-12)
        assert back.objects[0].name == "o"

    def test_version_required(self):
        import json

        model = make_model(np.zeros((1, 3)), np.zeros((1, 3)))
        doc = json.loads(model.to_json())
        assert doc["version"] == 1
        del doc["version"]
        with pytest.raises(ValueError):
            EmbodiedModel.from_json(json.dumps(doc))

    def test_unknown_version_rejected(self):
        import json

        model = make_model(np.zeros((1, 3)), np.zeros((1, 3)))
        doc = json.loads(model.to_json())
        doc["version"] = 99
        with pytest.raises(ValueError):
            EmbodiedModel.from_json(json.dumps(doc))
