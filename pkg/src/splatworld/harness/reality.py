"""The synthetic reference scene: ground-truth dynamics and camera streams.

The reference world is itself an embodied model (dense textured Gaussians
bonded to reference particles) driven by scripted kinematic bodies and a
reality-parameterized physics rollout. It stands in for real cameras,
ground-truth rigs, and the robot.
"""

from __future__ import annotations

import numpy as np

from ..geometry import Plane, quat_mul
from ..model.assemble import assemble_model
from ..model.embodied import ObjectMeta
from ..physics.engine import physics_step, set_kinematic_targets
from ..physics.state import PhysicsConfig
from ..rendering.rasterizer import RenderedImage, render
from .primitives import build_pusher, build_reference_object, build_table, yaw_quat, yaw_rotate
from .scenario import Scenario, camera_rig, interpolate_script, pusher_position
from .tracking import FrameTracker

GROUND = Plane([0.0, 0.0, 1.0], 0.0)


def default_queries(spec) -> np.ndarray:
    """Deterministic object-local query points for tracking evaluation."""
    sx, sy, sz = np.asarray(spec.size, dtype=float)
    if spec.shape == "rope":
        xs = np.linspace(-0.4 * sx, 0.4 * sx, max(spec_queries(spec), 2))
        return np.stack([xs, np.zeros_like(xs), np.zeros_like(xs)], axis=-1)
    return np.array(
        [
            [0.3 * sx, 0.3 * sy, 0.0],
            [-0.3 * sx, 0.3 * sy, 0.0],
            [0.3 * sx, -0.3 * sy, 0.0],
            [-0.3 * sx, -0.3 * sy, 0.0],
            [0.0, 0.0, 0.3 * sz],
        ]
    )


def spec_queries(spec) -> int:
    return 5


class Reality:
    """Reference scene stepped in lockstep with the tracked model."""

    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.cameras = camera_rig(scenario.cameras)
        self.train_cameras = self.cameras[: scenario.cameras.train]
        self.eval_cameras = self.cameras[scenario.cameras.train :]
        self.plane = GROUND

        parts = []
        self.object_metas = []
        for i, spec in enumerate(scenario.objects):
            meta = ObjectMeta(
                name=spec.name,
                body_id=i,
                seg_channel=i,
                rigid=spec.rigid,
                kinematic=bool(spec.script),
                mass=spec.mass,
            )
            parts.append((meta, build_reference_object(spec, meta)))
            self.object_metas.append(meta)
        self.pusher_body = -1
        if scenario.pusher.enabled:
            self.pusher_body = len(scenario.objects)
            meta = ObjectMeta(
                name="pusher",
                body_id=self.pusher_body,
                seg_channel=-1,
                kinematic=True,
                mass=1.0,
            )
            parts.append((meta, build_pusher(scenario.pusher, meta)))

        background = build_table(scenario.table_extent, seed=scenario.seed)
        self.model = assemble_model(
            parts, background, self.plane, seg_channels=len(scenario.objects)
        )
        self.physics = PhysicsConfig(gravity=np.asarray(scenario.reality_gravity))

        st = self.model.particles
        for meta, spec in zip(self.object_metas, scenario.objects):
            if not meta.kinematic and any(spec.initial_velocity):
                st.v[st.body_id == meta.body_id] = np.asarray(spec.initial_velocity)

        # per-body rest data for script-driven targets
        self._rest = {}
        for i, spec in enumerate(scenario.objects):
            members = np.flatnonzero(st.body_id == i)
            self._rest[i] = (members, st.x_rest[members].copy(), st.q_rest[members].copy())
        if self.pusher_body >= 0:
            members = np.flatnonzero(st.body_id == self.pusher_body)
            self._rest[self.pusher_body] = (
                members,
                st.x_rest[members].copy(),
                st.q_rest[members].copy(),
            )
        self.step_index = 0

        # ground-truth trackers bind queries to reference particle frames
        self.queries_local = [default_queries(spec) for spec in scenario.objects]
        self._gt_trackers = []
        for i, spec in enumerate(scenario.objects):
            pos0 = np.asarray(spec.pose[:3], dtype=float)
            yaw0 = float(spec.pose[3]) if len(spec.pose) > 3 else 0.0
            world0 = yaw_rotate(self.queries_local[i], yaw0) + pos0
            members = self._rest[i][0]
            self._gt_trackers.append(
                FrameTracker(st.x[members], st.q[members], world0)
            )
            self.queries_local[i] = world0  # keep the step-0 world positions

    # ------------------------------------------------------------------

    def script_targets(self, step: int) -> dict:
        """Kinematic pose targets (model and reality share the pusher's)."""
        targets = {}
        st = self.model.particles
        for i, spec in enumerate(self.scenario.objects):
            if not spec.script:
                continue
            pos_t, yaw_t = interpolate_script(spec.script, step)
            pos0 = np.asarray(spec.pose[:3], dtype=float)
            yaw0 = float(spec.pose[3]) if len(spec.pose) > 3 else 0.0
            members, rest_x, rest_q = self._rest[i]
            rel = yaw_quat(yaw_t - yaw0)
            x_t = yaw_rotate(rest_x - pos0, yaw_t - yaw0) + pos_t
            q_t = quat_mul(rel, rest_q)
            targets[i] = (x_t, q_t)
        if self.pusher_body >= 0:
            members, rest_x, rest_q = self._rest[self.pusher_body]
            pos_t = pusher_position(self.scenario.pusher, step)
            start = np.asarray(self.scenario.pusher.start, dtype=float)
            targets[self.pusher_body] = (rest_x - start + pos_t, rest_q.copy())
        return targets

    def pusher_targets(self, step: int) -> dict:
        """The subset of targets the tracked model is allowed to know."""
        if self.pusher_body < 0:
            return {}
        return {self.pusher_body: self.script_targets(step)[self.pusher_body]}

    def advance(self):
        self.step_index += 1
        for body, (x_t, q_t) in self.script_targets(self.step_index).items():
            set_kinematic_targets(self.model.particles, body, x_t, q_t)
        physics_step(self.model.particles, self.physics, self.model.shape_set, self.plane)
        self.model.apply_bonds()

    def render_view(self, cam) -> RenderedImage:
        return render(self.model.gaussians, cam)

    def train_images(self) -> list:
        return [(self.render_view(c).rgb, c) for c in self.train_cameras]

    def instance_masks(self, cam) -> np.ndarray:
        """Per-object boolean masks (H, W, K) from the segmentation channels."""
        return self.render_view(cam).seg > 0.5

    def foreground_mask(self, cam) -> np.ndarray:
        return self.instance_masks(cam).any(axis=-1)

    def object_bbox(self, index: int, margin: float = 0.015) -> np.ndarray:
        g = self.model.gaussians
        sel = g.seg[:, index] > 0.5
        pts = g.x[sel]
        return np.stack([pts.min(axis=0) - margin, pts.max(axis=0) + margin])

    def gt_query_positions(self) -> np.ndarray:
        """Current world positions of all query points, object order."""
        st = self.model.particles
        out = []
        for i, tracker in enumerate(self._gt_trackers):
            members = self._rest[i][0]
            out.append(tracker.predict(st.x[members], st.q[members]))
        return np.concatenate(out)
