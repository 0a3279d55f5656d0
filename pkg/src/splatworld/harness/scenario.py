"""Scenario descriptions: objects, cameras, scripts, and reality overrides.

Scenarios are JSON documents with a schema version. The built-in library
(single_push, two_object_push, gravity_drop, rope_drag) gives the canonical
evaluation scenes; they are synthetic analogues of tabletop manipulation,
not replicas of any particular recorded episode.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError
from ..geometry import Camera, look_at

SCENARIO_SCHEMA_VERSION = 1


@dataclass
class Keyframe:
    step: int
    pos: tuple
    yaw: float = 0.0


@dataclass
class ObjectSpec:
    name: str
    shape: str = "box"  # box | cylinder | tblock | rope
    size: tuple = (0.06, 0.06, 0.06)
    pose: tuple = (0.0, 0.0, 0.03, 0.0)  # x, y, z, yaw
    rigid: bool = True
    mass: float = 0.1
    particle_radius: float = 0.0075
    color_seed: int = 0
    # reality-side behavior: scripted keyframes make the reference object
    # kinematic; otherwise it is simulated with the reality physics
    script: list = field(default_factory=list)
    initial_velocity: tuple = (0.0, 0.0, 0.0)


@dataclass
class PusherSpec:
    enabled: bool = False
    radius: float = 0.015
    height: float = 0.08
    start: tuple = (-0.1, 0.0, 0.04)
    end: tuple = (0.0, 0.0, 0.04)
    step_start: int = 5
    step_end: int = 70


@dataclass
class CameraRigSpec:
    count: int = 5
    train: int = 3
    radius: float = 0.85
    heights: tuple = (0.45, 0.55)
    target: tuple = (0.0, 0.0, 0.02)
    fov_deg: float = 55.0
    width: int = 160
    height: int = 90


@dataclass
class Scenario:
    name: str
    seed: int = 0
    duration: int = 100
    objects: list = field(default_factory=list)
    pusher: PusherSpec = field(default_factory=PusherSpec)
    cameras: CameraRigSpec = field(default_factory=CameraRigSpec)
    # reality physics (the reference rollout); model physics may differ
    reality_gravity: tuple = (0.0, 0.0, -9.81)
    model_gravity: tuple = (0.0, 0.0, -9.81)
    queries_per_object: int = 5
    table_extent: float = 0.7
    init_joint_iters: int = 25
    init_refine_iters: int = 60
    gaussian_radius: float = 0.005

    def validate(self):
        if self.duration < 1:
            raise ConfigError("duration must be >= 1")
        if not self.objects:
            raise ConfigError("a scenario needs at least one object")
        if self.cameras.train < 3:
            raise ConfigError("at least 3 training cameras are required")
        if self.cameras.count - self.cameras.train < 1:
            raise ConfigError("at least 1 evaluation camera is required")
        for o in self.objects:
            if o.shape not in ("box", "cylinder", "tblock", "rope"):
                raise ConfigError(f"unknown object shape {o.shape!r}")
        return self

    # ------------------------------------------------------------------

    def to_json(self) -> str:
        doc = asdict(self)
        doc["schema_version"] = SCENARIO_SCHEMA_VERSION
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        version = doc.pop("schema_version", None)
        if version != SCENARIO_SCHEMA_VERSION:
            raise ConfigError(f"unsupported scenario schema version {version!r}")
        objects = [
            ObjectSpec(**{**o, "script": [Keyframe(**k) for k in o.get("script", [])]})
            for o in doc.pop("objects", [])
        ]
        pusher = PusherSpec(**doc.pop("pusher"))
        cameras = CameraRigSpec(**doc.pop("cameras"))
        return cls(objects=objects, pusher=pusher, cameras=cameras, **doc).validate()


def camera_rig(spec: CameraRigSpec) -> list[Camera]:
    """Evenly spaced ring of cameras looking at the table center."""
    fx = (spec.width / 2.0) / np.tan(np.radians(spec.fov_deg) / 2.0)
    cams = []
    for i in range(spec.count):
        ang = 2.0 * np.pi * i / spec.count - np.pi / 2.0
        eye = [
            spec.radius * np.cos(ang),
            spec.radius * np.sin(ang),
            spec.heights[i % len(spec.heights)],
        ]
        cams.append(
            look_at(
                eye,
                spec.target,
                fx=fx,
                fy=fx,
                width=spec.width,
                height=spec.height,
                name=f"cam{i}",
            )
        )
    return cams


def interpolate_script(script: list[Keyframe], step: int):
    """Piecewise-linear pose (pos, yaw) at a step; clamps outside the range."""
    if not script:
        return None
    if step <= script[0].step:
        k = script[0]
        return np.asarray(k.pos, dtype=float), float(k.yaw)
    if step >= script[-1].step:
        k = script[-1]
        return np.asarray(k.pos, dtype=float), float(k.yaw)
    for a, b in zip(script[:-1], script[1:]):
        if a.step <= step <= b.step:
            t = (step - a.step) / max(b.step - a.step, 1)
            pos = (1 - t) * np.asarray(a.pos, dtype=float) + t * np.asarray(b.pos, dtype=float)
            yaw = (1 - t) * a.yaw + t * b.yaw
            return pos, yaw
    raise AssertionError("unreachable: script keyframes must be sorted")


def pusher_position(spec: PusherSpec, step: int) -> np.ndarray:
    start = np.asarray(spec.start, dtype=float)
    end = np.asarray(spec.end, dtype=float)
    if step <= spec.step_start:
        return start
    if step >= spec.step_end:
        return end
    t = (step - spec.step_start) / max(spec.step_end - spec.step_start, 1)
    return (1 - t) * start + t * end


# ----------------------------------------------------------------------
# built-in scenario library
# ----------------------------------------------------------------------


def single_push() -> Scenario:
    """A pushed box that also yaws and drifts sideways; the pusher alone
    cannot explain the full motion, so prediction-only drifts."""
    box = ObjectSpec(
        name="box",
        size=(0.06, 0.06, 0.06),
        pose=(0.0, 0.0, 0.0305, 0.0),
        color_seed=11,
        script=[
            Keyframe(0, (0.0, 0.0, 0.0305), 0.0),
            Keyframe(25, (0.0, 0.0, 0.0305), 0.0),
            Keyframe(75, (0.085, 0.04, 0.0305), 0.7),
            Keyframe(100, (0.085, 0.04, 0.0305), 0.7),
        ],
    )
    pusher = PusherSpec(
        enabled=True,
        start=(-0.085, 0.0, 0.04),
        end=(0.005, 0.0, 0.04),
        step_start=5,
        step_end=75,
    )
    return Scenario(name="single_push", seed=101, duration=100, objects=[box], pusher=pusher)


def two_object_push() -> Scenario:
    """Scripted box A shoves dynamic box B; B also settles a small drop, so
    the collision, ground, and gravity priors all matter."""
    a = ObjectSpec(
        name="box_a",
        size=(0.06, 0.06, 0.06),
        pose=(-0.03, -0.005, 0.0305, 0.0),
        color_seed=21,
        script=[
            Keyframe(0, (-0.03, -0.005, 0.0305), 0.0),
            Keyframe(10, (-0.03, -0.005, 0.0305), 0.0),
            Keyframe(70, (0.055, 0.005, 0.0305), 0.15),
            Keyframe(100, (0.055, 0.005, 0.0305), 0.15),
        ],
    )
    b = ObjectSpec(
        name="box_b",
        size=(0.06, 0.06, 0.06),
        pose=(0.095, 0.01, 0.0355, 0.1),  # starts 5 mm above the table
        color_seed=22,
    )
    return Scenario(name="two_object_push", seed=202, duration=100, objects=[a, b])


def gravity_drop() -> Scenario:
    """A tossed box: the reality rollout starts with sideways velocity and
    stronger gravity than the model assumes."""
    box = ObjectSpec(
        name="box",
        size=(0.07, 0.07, 0.07),
        pose=(-0.06, 0.0, 0.13, 0.2),
        color_seed=31,
        initial_velocity=(0.3, 0.0, 0.0),
    )
    sc = Scenario(
        name="gravity_drop",
        seed=303,
        duration=100,
        objects=[box],
        model_gravity=(0.0, 0.0, -9.0),
    )
    return sc


def rope_drag() -> Scenario:
    """A deformable particle chain dragged by one scripted end (extra scene,
    not part of the acceptance set)."""
    rope = ObjectSpec(
        name="rope",
        shape="rope",
        size=(0.24, 0.012, 0.012),
        pose=(0.0, 0.0, 0.013, 0.0),
        rigid=False,
        mass=0.3,
        particle_radius=0.012,
        color_seed=41,
    )
    pusher = PusherSpec(
        enabled=True,
        radius=0.012,
        height=0.05,
        start=(0.13, 0.0, 0.025),
        end=(0.13, 0.12, 0.025),
        step_start=10,
        step_end=80,
    )
    return Scenario(name="rope_drag", seed=404, duration=100, objects=[rope], pusher=pusher)


BUILTIN_SCENARIOS = {
    "single_push": single_push,
    "two_object_push": two_object_push,
    "gravity_drop": gravity_drop,
    "rope_drag": rope_drag,
}


def load_scenario(name_or_path: str) -> Scenario:
    if name_or_path in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name_or_path]().validate()
    try:
        with open(name_or_path) as f:
            return Scenario.from_json(f.read())
    except FileNotFoundError:
        raise ConfigError(
            f"{name_or_path!r} is neither a built-in scenario "
            f"({', '.join(sorted(BUILTIN_SCENARIOS))}) nor a scenario file"
        )
