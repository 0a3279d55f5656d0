"""Position-based dynamics stepper: integrate, solve constraints, rebuild velocities."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteState, UnknownBody
from ..geometry import (
    Plane,
    matrix_to_quat,
    quat_integrate,
    quat_mul,
    quat_to_axis_angle_rate,
    quat_to_matrix,
)
from .broadphase import broad_phase
from .constraints import collision_deltas_batch
from .state import ParticleState, PhysicsConfig, ShapeSet


def set_kinematic_targets(
    state: ParticleState,
    body_id: int,
    x_targets: np.ndarray,
    q_targets: np.ndarray | None = None,
):
    """Schedule scripted poses for a kinematic body's particles.

    Positions snap over the next physics step; velocities are derived from
    the displacement so contacts respond correctly.
    """
    members = np.flatnonzero(state.body_id == body_id)
    if members.size == 0 or not np.all(state.kinematic[members]):
        raise UnknownBody(f"body {body_id} does not exist or is not kinematic")
    x_targets = np.asarray(x_targets, dtype=float).reshape(-1, 3)
    if x_targets.shape[0] != members.size:
        raise ValueError(
            f"body {body_id}: {x_targets.shape[0]} targets for {members.size} particles"
        )
    state.target_x[members] = x_targets
    if q_targets is not None:
        state.target_q[members] = np.asarray(q_targets, dtype=float).reshape(-1, 4)


def _solve_shapes_batched(state: ParticleState, shapes: ShapeSet, mu: float, delta, cnt, dyn):
    """Accumulate shape-matching deltas and write member orientations."""
    members = shapes.members
    starts = shapes.member_offsets
    m = shapes.member_mass
    x = state.x[members]
    x_rest = shapes.member_rest

    centroid = np.add.reduceat(m[:, None] * x, starts, axis=0) / shapes.total_mass[:, None]

    rot = quat_to_matrix(state.q[members])
    rel = np.einsum("kab,kcb->kac", rot, shapes.rest_rot_mats)
    terms = shapes.member_moment[:, None, None] * rel
    terms += m[:, None, None] * np.einsum("ki,kj->kij", x, x_rest)
    a = np.add.reduceat(terms.reshape(-1, 9), starts, axis=0).reshape(-1, 3, 3)
    a -= shapes.total_mass[:, None, None] * np.einsum(
        "si,sj->sij", centroid, shapes.rest_centroid
    )

    u, sv, vt = np.linalg.svd(a)
    degenerate = sv[:, -1] < 1e-10
    det = np.linalg.det(np.einsum("sij,sjk->sik", u, vt))
    u[:, :, 2] *= np.sign(det)[:, None]
    r = np.einsum("sij,sjk->sik", u, vt)
    if np.any(degenerate):
        r[degenerate] = shapes.prev_rotation[degenerate]
    shapes.prev_rotation = r

    shape_of = shapes.member_shape
    goal = (
        np.einsum("kij,kj->ki", r[shape_of], x_rest - shapes.rest_centroid[shape_of])
        + centroid[shape_of]
    )
    d = (mu * shapes.stiffness[shape_of])[:, None] * (goal - x)
    movable = dyn[members]
    np.add.at(delta, members[movable], d[movable])
    np.add.at(cnt, members[movable], 1.0)

    shape_q = matrix_to_quat(r)
    om = shapes.orient_members
    om_dyn = om[dyn[om]]
    state.q[om_dyn] = quat_mul(
        shape_q[shapes.orient_shape[dyn[om]]], state.q_rest[om_dyn]
    )


def physics_step(
    state: ParticleState,
    config: PhysicsConfig,
    shapes: ShapeSet | None = None,
    plane: Plane | None = None,
) -> ParticleState:
    """Advance the particle state by one frame of config.dt seconds.

    Each substep integrates positions/orientations, runs Jacobi rounds over
    ground, collision and shape constraints (deltas summed and averaged by
    contributing-constraint count), then rebuilds velocities from the
    position change. Velocities are damped once at the end of the full step
    and external forces are cleared. A non-finite result rolls the state
    back and raises NonFiniteState.
    """
    saved = state.copy()
    dt = config.dt
    dt_s = dt / config.substeps
    kin = state.kinematic
    dyn = ~kin

    if np.any(kin):
        state.v[kin] = (state.target_x[kin] - state.x[kin]) / dt
        state.w[kin] = quat_to_axis_angle_rate(state.target_q[kin], state.q[kin], dt)

    inv_m = state.inv_mass
    accel = state.f * inv_m[:, None] + config.gravity * dyn[:, None]

    body_collide = None
    if config.enable_collisions:
        n_bodies = int(state.body_id.max()) + 1
        body_collide = np.ones(n_bodies, dtype=np.int64)
        body_collide[_rigid_body_ids(shapes, state, n_bodies)] = 0
        for b in range(n_bodies):  # fully kinematic bodies never self collide
            members = state.body_id == b
            if np.any(members) and np.all(state.kinematic[members]):
                body_collide[b] = 0

    for _ in range(config.substeps):
        x0 = state.x.copy()
        q0 = state.q.copy()
        state.x += dt_s * state.v + dt_s * dt_s * accel
        state.q = quat_integrate(state.q, state.w, dt_s)

        pairs = (
            broad_phase(state.x, state.radius, state.body_id, body_collide)
            if config.enable_collisions
            else np.zeros((0, 2), dtype=np.int64)
        )

        for _ in range(config.jacobi_iterations):
            delta = np.zeros_like(state.x)
            cnt = np.zeros(state.count)

            if plane is not None and config.enable_ground:
                c = np.minimum(
                    plane.signed_distance(state.x) - state.radius, 0.0
                )
                active = (c < 0.0) & dyn
                delta[active] += (-config.relaxation_ground * c[active])[:, None] * plane.n
                cnt[active] += 1.0

            if pairs.size:
                di, dj, act = collision_deltas_batch(
                    state.x, state.radius, inv_m, pairs, config.relaxation_collision
                )
                ai, aj = pairs[act, 0], pairs[act, 1]
                np.add.at(delta, ai, di[act])
                np.add.at(delta, aj, dj[act])
                np.add.at(cnt, ai, 1.0)
                np.add.at(cnt, aj, 1.0)

            if shapes is not None and len(shapes):
                _solve_shapes_batched(
                    state, shapes, config.relaxation_shape, delta, cnt, dyn
                )

            state.x[dyn] += delta[dyn] / np.maximum(cnt[dyn], 1.0)[:, None]

        state.v = (state.x - x0) / dt_s
        state.w = quat_to_axis_angle_rate(state.q, q0, dt_s)

        if not state.is_finite():
            _restore(state, saved)
            raise NonFiniteState("non-finite particle state; step rolled back")

    state.v[dyn] *= config.damping
    state.w[dyn] *= config.damping
    state.f[:] = 0.0
    return state


def _rigid_body_ids(shapes: ShapeSet | None, state: ParticleState, n_bodies: int):
    """Bodies whose structure is held by a full-body shape skip self collisions."""
    if shapes is None:
        return np.zeros(0, dtype=np.int64)
    out = []
    for s in shapes.shapes:
        bids = np.unique(state.body_id[s.indices])
        if bids.size != 1:
            continue
        bid = int(bids[0])
        # a shape spanning its whole body marks the body rigid
        if s.indices.size == np.count_nonzero(state.body_id == bid):
            out.append(bid)
    return np.unique(np.array(out, dtype=np.int64)) if out else np.zeros(0, dtype=np.int64)


def _restore(state: ParticleState, saved: ParticleState):
    for name, val in saved.__dict__.items():
        getattr(state, name)[:] = val
