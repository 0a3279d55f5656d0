"""The embodied model: particles + shapes + Gaussians + bonds, with JSON IO."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..geometry import Plane
from ..physics.state import ParticleState, Shape, ShapeSet
from ..rendering.gaussians import GaussianSet
from .bonds import apply_bonds

SCHEMA_VERSION = 1


@dataclass
class ObjectMeta:
    """Per-object bookkeeping shared by physics and rendering."""

    name: str
    body_id: int
    seg_channel: int = -1
    rigid: bool = True
    kinematic: bool = False
    mass: float = 0.1


class EmbodiedModel:
    """World model: physical particles with bonded visual Gaussians.

    Background Gaussians are unbonded (parent -1) and never move; object
    Gaussians follow their parent particles rigidly through bonds.
    """

    def __init__(
        self,
        particles: ParticleState,
        shapes: list[Shape],
        gaussians: GaussianSet,
        bond_offset: np.ndarray,
        bond_rot: np.ndarray,
        objects: list[ObjectMeta],
        plane: Plane | None = None,
    ):
        self.particles = particles
        self.shapes = shapes
        self.shape_set = ShapeSet(shapes, particles) if shapes else None
        self.gaussians = gaussians
        self.bond_offset = np.asarray(bond_offset, dtype=float).reshape(-1, 3)
        self.bond_rot = np.asarray(bond_rot, dtype=float).reshape(-1, 4)
        self.objects = list(objects)
        self.plane = plane
        bonded = gaussians.parent >= 0
        if bonded.any() and gaussians.parent[bonded].max() >= particles.count:
            raise ValueError("bond references a particle that does not exist")

    def apply_bonds(self):
        apply_bonds(self)

    def object_gaussian_mask(self) -> np.ndarray:
        """Gaussians bonded to a dynamic particle; these receive position
        and rotation updates during correction and generate forces."""
        mask = self.gaussians.parent >= 0
        out = np.zeros(self.gaussians.count, dtype=bool)
        idx = np.flatnonzero(mask)
        out[idx] = ~self.particles.kinematic[self.gaussians.parent[idx]]
        return out

    def copy(self) -> "EmbodiedModel":
        shapes = [
            Shape(
                s.indices.copy(),
                s.stiffness,
                rest_centroid=None if s.rest_centroid is None else s.rest_centroid.copy(),
                total_mass=s.total_mass,
                orient_indices=s.orient_indices.copy(),
                prev_rotation=s.prev_rotation.copy(),
            )
            for s in self.shapes
        ]
        return EmbodiedModel(
            self.particles.copy(),
            shapes,
            self.gaussians.copy(),
            self.bond_offset.copy(),
            self.bond_rot.copy(),
            [ObjectMeta(**asdict(o)) for o in self.objects],
            self.plane,
        )

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_json(self) -> str:
        p = self.particles
        g = self.gaussians
        doc = {
            "version": SCHEMA_VERSION,
            "particles": {
                "x": p.x.tolist(),
                "v": p.v.tolist(),
                "q": p.q.tolist(),
                "w": p.w.tolist(),
                "f": p.f.tolist(),
                "radius": p.radius.tolist(),
                "mass": p.mass.tolist(),
                "kinematic": p.kinematic.astype(int).tolist(),
                "body_id": p.body_id.tolist(),
                "x_rest": p.x_rest.tolist(),
                "q_rest": p.q_rest.tolist(),
            },
            "shapes": [
                {
                    "indices": s.indices.tolist(),
                    "stiffness": s.stiffness,
                    "orient_indices": s.orient_indices.tolist(),
                }
                for s in self.shapes
            ],
            "gaussians": {
                "x": g.x.tolist(),
                "q": g.q.tolist(),
                "scale": g.scale.tolist(),
                "opacity": g.opacity.tolist(),
                "color": g.color.tolist(),
                "seg": g.seg.tolist(),
                "parent": g.parent.tolist(),
            },
            "bonds": {
                "offset": self.bond_offset.tolist(),
                "rotation": self.bond_rot.tolist(),
            },
            "objects": [asdict(o) for o in self.objects],
            "plane": None if self.plane is None else {"n": self.plane.n.tolist(), "d": self.plane.d},
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "EmbodiedModel":
        doc = json.loads(text)
        if "version" not in doc:
            raise ValueError("model document is missing the version field")
        if doc["version"] != SCHEMA_VERSION:
            raise ValueError(f"unsupported model version {doc['version']}")
        pd = doc["particles"]
        particles = ParticleState(
            np.array(pd["x"]),
            radius=np.array(pd["radius"]),
            mass=np.array(pd["mass"]),
            q=np.array(pd["q"]),
            body_id=np.array(pd["body_id"]),
            kinematic=np.array(pd["kinematic"], dtype=bool),
        )
        particles.v = np.array(pd["v"], dtype=float).reshape(-1, 3)
        particles.w = np.array(pd["w"], dtype=float).reshape(-1, 3)
        particles.f = np.array(pd["f"], dtype=float).reshape(-1, 3)
        particles.x_rest = np.array(pd["x_rest"], dtype=float).reshape(-1, 3)
        particles.q_rest = np.array(pd["q_rest"], dtype=float).reshape(-1, 4)
        shapes = [
            Shape(
                np.array(s["indices"], dtype=np.int64),
                s["stiffness"],
                orient_indices=np.array(s["orient_indices"], dtype=np.int64),
            )
            for s in doc["shapes"]
        ]
        gd = doc["gaussians"]
        gaussians = GaussianSet(
            np.array(gd["x"]),
            q=np.array(gd["q"]),
            scale=np.array(gd["scale"]),
            opacity=np.array(gd["opacity"]),
            color=np.array(gd["color"]),
            seg=np.array(gd["seg"], dtype=float).reshape(len(gd["x"]), -1),
            parent=np.array(gd["parent"]),
        )
        plane = None
        if doc.get("plane"):
            plane = Plane(np.array(doc["plane"]["n"]), doc["plane"]["d"])
        return cls(
            particles,
            shapes,
            gaussians,
            np.array(doc["bonds"]["offset"], dtype=float).reshape(-1, 3),
            np.array(doc["bonds"]["rotation"], dtype=float).reshape(-1, 4),
            [ObjectMeta(**o) for o in doc["objects"]],
            plane,
        )
