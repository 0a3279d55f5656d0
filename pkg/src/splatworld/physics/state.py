"""Particle state (structure of arrays), shape-matching groups, physics config."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import IDENTITY_QUAT, quat_to_matrix


class ParticleState:
    """Oriented-particle state stored as flat float64 arrays.

    Kinematic particles have inverse mass zero: constraints never move them
    and gravity/forces do not act on them; their motion comes from scripted
    targets (see engine.set_kinematic_targets).
    """

    def __init__(
        self,
        x: np.ndarray,
        radius: np.ndarray,
        mass: np.ndarray,
        q: np.ndarray | None = None,
        body_id: np.ndarray | None = None,
        kinematic: np.ndarray | None = None,
    ):
        self.x = np.array(x, dtype=float).reshape(-1, 3)
        n = self.x.shape[0]
        self.v = np.zeros((n, 3))
        self.q = (
            np.array(q, dtype=float).reshape(-1, 4)
            if q is not None
            else np.tile(IDENTITY_QUAT, (n, 1))
        )
        self.w = np.zeros((n, 3))
        self.f = np.zeros((n, 3))
        self.radius = np.array(radius, dtype=float).reshape(-1) * np.ones(n)
        self.mass = np.array(mass, dtype=float).reshape(-1) * np.ones(n)
        if np.any(self.mass <= 0) or np.any(self.radius <= 0):
            raise ValueError("particle masses and radii must be positive")
        self.kinematic = (
            np.array(kinematic, dtype=bool).reshape(-1)
            if kinematic is not None
            else np.zeros(n, dtype=bool)
        )
        self.body_id = (
            np.array(body_id, dtype=np.int64).reshape(-1)
            if body_id is not None
            else np.zeros(n, dtype=np.int64)
        )
        self.x_rest = self.x.copy()
        self.q_rest = self.q.copy()
        # scripted pose targets for kinematic bodies, consumed by physics_step
        self.target_x = self.x.copy()
        self.target_q = self.q.copy()

    @property
    def count(self) -> int:
        return self.x.shape[0]

    @property
    def inv_mass(self) -> np.ndarray:
        w = 1.0 / self.mass
        w[self.kinematic] = 0.0
        return w

    def set_rest_pose(self):
        self.x_rest = self.x.copy()
        self.q_rest = self.q.copy()

    def copy(self) -> "ParticleState":
        out = ParticleState.__new__(ParticleState)
        for name, val in self.__dict__.items():
            setattr(out, name, val.copy())
        return out

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.x))
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.q))
            and np.all(np.isfinite(self.w))
        )


@dataclass
class Shape:
    """Shape-matching group: indices into the particle arrays plus caches."""

    indices: np.ndarray
    stiffness: float
    rest_centroid: np.ndarray = None
    total_mass: float = 0.0
    # members whose orientation this shape drives (all for rigid bodies,
    # the central particle for deformable neighborhoods)
    orient_indices: np.ndarray = None
    prev_rotation: np.ndarray = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if self.indices.size < 2:
            raise ValueError("a shape needs at least two particles")
        if not 0.0 < self.stiffness <= 1.0:
            raise ValueError("stiffness must be in (0, 1]")
        if self.orient_indices is None:
            self.orient_indices = self.indices.copy()
        else:
            self.orient_indices = np.asarray(self.orient_indices, dtype=np.int64).reshape(-1)
        if self.prev_rotation is None:
            self.prev_rotation = np.eye(3)

    def cache_rest(self, state: ParticleState):
        m = state.mass[self.indices]
        self.total_mass = float(m.sum())
        self.rest_centroid = (m[:, None] * state.x_rest[self.indices]).sum(axis=0) / self.total_mass


class ShapeSet:
    """Shapes packed into flat arrays for batched solving."""

    def __init__(self, shapes: list[Shape], state: ParticleState):
        self.shapes = list(shapes)
        for s in self.shapes:
            if s.rest_centroid is None or s.total_mass == 0.0:
                s.cache_rest(state)
        n_shapes = len(self.shapes)
        self.members = (
            np.concatenate([s.indices for s in self.shapes])
            if n_shapes
            else np.zeros(0, dtype=np.int64)
        )
        self.member_shape = (
            np.concatenate(
                [np.full(s.indices.size, i, dtype=np.int64) for i, s in enumerate(self.shapes)]
            )
            if n_shapes
            else np.zeros(0, dtype=np.int64)
        )
        self.stiffness = np.array([s.stiffness for s in self.shapes])
        self.rest_centroid = (
            np.stack([s.rest_centroid for s in self.shapes])
            if n_shapes
            else np.zeros((0, 3))
        )
        self.total_mass = np.array([s.total_mass for s in self.shapes])
        self.orient_members = (
            np.concatenate([s.orient_indices for s in self.shapes])
            if n_shapes
            else np.zeros(0, dtype=np.int64)
        )
        self.orient_shape = (
            np.concatenate(
                [
                    np.full(s.orient_indices.size, i, dtype=np.int64)
                    for i, s in enumerate(self.shapes)
                ]
            )
            if n_shapes
            else np.zeros(0, dtype=np.int64)
        )
        self.prev_rotation = (
            np.stack([s.prev_rotation for s in self.shapes])
            if n_shapes
            else np.zeros((0, 3, 3))
        )
        sizes = np.array([s.indices.size for s in self.shapes], dtype=np.int64)
        # segment start offsets for np.add.reduceat over the member arrays
        self.member_offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]) if n_shapes else np.zeros(0, dtype=np.int64)
        # constant inertia-like term weights: (1/5) m r^2 per member
        st = state
        self.member_moment = 0.2 * st.mass[self.members] * st.radius[self.members] ** 2
        self.rest_rot_mats = quat_to_matrix(st.q_rest[self.members])
        self.member_mass = st.mass[self.members]
        self.member_rest = st.x_rest[self.members]

    def __len__(self) -> int:
        return len(self.shapes)


@dataclass
class PhysicsConfig:
    """Stepper parameters; defaults match the tuned 30 Hz regime."""

    dt: float = 1.0 / 30.0
    substeps: int = 20
    jacobi_iterations: int = 4
    damping: float = 0.9
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    relaxation_ground: float = 1.0
    relaxation_collision: float = 0.8
    relaxation_shape: float = 1.0
    enable_collisions: bool = True
    enable_ground: bool = True

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.substeps < 1 or self.jacobi_iterations < 1:
            raise ValueError("substeps and jacobi_iterations must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")
