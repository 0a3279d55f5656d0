import numpy as np

from splatworld.physics import broad_phase


def brute_force_pairs(x, radius, margin, body_id=None, body_collide=None):
    n = x.shape[0]
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            if body_id is not None and body_id[i] == body_id[j] and not body_collide[body_id[i]]:
                continue
            if np.linalg.norm(x[i] - x[j]) < radius[i] + radius[j] + margin:
                out.append((i, j))
    return out


def test_distant_particles_empty():
    x = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    r = np.array([0.01, 0.01])
    assert broad_phase(x, r).shape == (0, 2)


def test_matches_brute_force():
    rng = np.random.default_rng(21)
    x = rng.uniform(-0.2, 0.2, size=(100, 3))
    r = rng.uniform(0.005, 0.02, size=100)
    got = broad_phase(x, r)
    want = brute_force_pairs(x, r, margin=r.max())
    assert [tuple(p) for p in got] == want


def test_three_touching_sorted():
    x = np.array([[0.0, 0.0, 0.0], [0.015, 0.0, 0.0], [0.0075, 0.012, 0.0]])
    r = np.full(3, 0.01)
    got = broad_phase(x, r, margin=0.0)
    assert [tuple(p) for p in got] == [(0, 1), (0, 2), (1, 2)]


def test_same_body_exclusion():
    x = np.array([[0.0, 0.0, 0.0], [0.005, 0.0, 0.0], [0.02, 0.0, 0.0]])
    r = np.full(3, 0.01)
    body = np.array([0, 0, 1])
    collide = np.array([0, 1])
    got = broad_phase(x, r, body_id=body, body_self_collide=collide)
    want = brute_force_pairs(x, r, margin=r.max(), body_id=body, body_collide=collide)
    assert [tuple(p) for p in got] == want
    assert (0, 1) not in [tuple(p) for p in got]


def test_custom_margin_exactness():
    rng = np.random.default_rng(22)
    x = rng.uniform(-0.1, 0.1, size=(60, 3))
    r = np.full(60, 0.008)
    got = broad_phase(x, r, margin=0.002)
    want = brute_force_pairs(x, r, margin=0.002)
    assert [tuple(p) for p in got] == want


def test_single_and_empty():
    assert broad_phase(np.zeros((0, 3)), np.zeros(0)).shape == (0, 2)
    assert broad_phase(np.zeros((1, 3)), np.ones(1)).shape == (0, 2)
