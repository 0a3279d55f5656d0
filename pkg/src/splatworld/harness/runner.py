"""Scenario execution: initialization, tracking loop, metrics, artifacts."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..model.assemble import assemble_model
from ..model.correction import CorrectionConfig, predict_correct_step
from ..model.embodied import EmbodiedModel, ObjectMeta
from ..model.init import InitConfig, initialize_object
from ..physics.engine import physics_step, set_kinematic_targets
from ..physics.state import PhysicsConfig
from ..rendering.gaussians import GaussianSet
from ..rendering.image_io import write_png
from ..rendering.rasterizer import render
from .metrics import TrajectoryRecord, metric_2d, metric_3d, metric_psnr
from .primitives import build_pusher
from .reality import Reality
from .scenario import Scenario
from .tracking import FrameTracker, track_query_points

MODES = ("corrected", "physics_only", "no_collisions", "no_gravity", "no_ground")

OUTPUT_ENV_VAR = "SPLATWORLD_OUT"


@dataclass
class RunResult:
    record: TrajectoryRecord
    metrics: dict
    model: EmbodiedModel
    out_dir: Path | None = None


def _project_points(cams, points):
    out = np.zeros((points.shape[0], len(cams), 2))
    for c, cam in enumerate(cams):
        u, _, _, valid = cam.project_many(points)
        out[:, c, :] = np.where(valid[:, None], u, np.nan)
    return out


def make_physics_config(scenario: Scenario, mode: str) -> PhysicsConfig:
    cfg = PhysicsConfig(gravity=np.asarray(scenario.model_gravity))
    if mode == "no_collisions":
        cfg.enable_collisions = False
    elif mode == "no_gravity":
        cfg.gravity = np.zeros(3)
    elif mode == "no_ground":
        cfg.enable_ground = False
    return cfg


def build_model_from_observations(
    scenario: Scenario, reality: Reality, init_cfg: InitConfig | None = None
) -> EmbodiedModel:
    """Initialize the tracked model from the frame-0 training views.

    Objects are built sequentially, each seeing the background and the
    objects built before it; the pusher is inserted from known geometry.
    """
    if init_cfg is None:
        init_cfg = InitConfig(
            n_joint_iters=scenario.init_joint_iters,
            m_refine_iters=scenario.init_refine_iters,
            gaussian_radius=scenario.gaussian_radius,
        )
    train = reality.train_cameras
    frame = {c.name: reality.render_view(c) for c in train}
    background = reality.model.gaussians.select(reality.model.gaussians.parent < 0)

    parts = []
    scene = background.copy()
    for i, spec in enumerate(scenario.objects):
        meta = ObjectMeta(
            name=spec.name,
            body_id=i,
            seg_channel=i,
            rigid=spec.rigid,
            kinematic=False,  # scripts are reality-side knowledge
            mass=spec.mass,
        )
        views = [
            (frame[c.name].rgb, frame[c.name].seg[:, :, i] > 0.5, c) for c in train
        ]
        part = initialize_object(
            views,
            reality.object_bbox(i),
            meta,
            init_cfg,
            scene_gaussians=scene,
            plane=reality.plane,
        )
        parts.append((meta, part))
        scene = GaussianSet.concatenate([scene, part.gaussians])
    if scenario.pusher.enabled:
        meta = ObjectMeta(
            name="pusher",
            body_id=len(scenario.objects),
            seg_channel=-1,
            kinematic=True,
            mass=1.0,
        )
        parts.append((meta, build_pusher(scenario.pusher, meta)))
    return assemble_model(
        parts, background, reality.plane, seg_channels=len(scenario.objects)
    )


def run_scenario(
    scenario: Scenario,
    mode: str = "corrected",
    out_dir: str | os.PathLike | None = None,
    save_frames: bool = False,
    correction_cfg: CorrectionConfig | None = None,
    init_cfg: InitConfig | None = None,
    seed: int | None = None,
) -> RunResult:
    """Run one tracking episode and (optionally) write its artifacts.

    Modes: corrected (full method), physics_only (prediction only), or the
    physical-prior ablations no_collisions / no_gravity / no_ground (these
    run with correction enabled but the prior disabled).
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; choose from {MODES}")
    scenario.validate()
    if seed is not None:
        scenario.seed = seed
    rng = np.random.default_rng(scenario.seed)
    if correction_cfg is None:
        correction_cfg = CorrectionConfig()

    t_init0 = time.perf_counter()
    reality = Reality(scenario)
    model = build_model_from_observations(scenario, reality, init_cfg)
    init_seconds = time.perf_counter() - t_init0

    physics_cfg = make_physics_config(scenario, mode)
    tracker = track_query_points(model, reality.gt_query_positions())

    steps = scenario.duration
    n_points = sum(len(q) for q in reality.queries_local)
    cams = reality.cameras
    gt3d = np.zeros((steps, n_points, 3))
    pred3d = np.zeros((steps, n_points, 3))
    gt2d = np.zeros((steps, n_points, len(cams), 2))
    pred2d = np.zeros((steps, n_points, len(cams), 2))

    eval_renders, eval_gt, eval_masks = [], [], []
    profile: dict = {}
    frames_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if save_frames:
            frames_dir = out_dir / "frames"
            frames_dir.mkdir(exist_ok=True)

    for t in range(steps):
        reality.advance()
        observations = [
            (reality.render_view(c).rgb, c) for c in reality.train_cameras
        ]
        targets = reality.pusher_targets(reality.step_index)
        if mode == "physics_only":
            t0 = time.perf_counter()
            for body, (x_t, q_t) in targets.items():
                set_kinematic_targets(model.particles, body, x_t, q_t)
            physics_step(model.particles, physics_cfg, model.shape_set, model.plane)
            model.apply_bonds()
            profile.setdefault("physics_ms", []).append(1e3 * (time.perf_counter() - t0))
        else:
            predict_correct_step(
                model,
                observations,
                physics_cfg,
                correction_cfg,
                rng=rng,
                kinematic_targets=targets,
                profile=profile,
            )

        gt = reality.gt_query_positions()
        pred = tracker.predict(model.gaussians.x, model.gaussians.q)
        gt3d[t] = gt
        pred3d[t] = pred
        gt2d[t] = _project_points(cams, gt)
        pred2d[t] = _project_points(cams, pred)

        for cam in reality.eval_cameras:
            eval_renders.append(render(model.gaussians, cam).rgb)
            ref = reality.render_view(cam)
            eval_gt.append(ref.rgb)
            eval_masks.append(ref.seg.max(axis=-1) > 0.5)
        if frames_dir is not None:
            cam = reality.eval_cameras[0]
            write_png(frames_dir / f"model_{t:04d}.png", render(model.gaussians, cam).rgb)
            write_png(frames_dir / f"reality_{t:04d}.png", reality.render_view(cam).rgb)

    record = TrajectoryRecord(gt3d, pred3d, gt2d, pred2d, [c.name for c in cams])
    metrics = {
        "scenario": scenario.name,
        "mode": mode,
        "seed": scenario.seed,
        "duration": steps,
        "metric_3d_cm": metric_3d(record),
        "metric_2d_px": metric_2d(record),
        "psnr_db": metric_psnr(eval_renders, eval_gt, eval_masks),
        "num_particles": int(model.particles.count),
        "num_gaussians": int(model.gaussians.count),
        "init_seconds": init_seconds,
        "correction_camera_indices": list(range(scenario.cameras.train))
        if mode != "physics_only"
        else [],
        "timing": {
            key + "_median": float(np.median(vals)) for key, vals in profile.items()
        },
    }
    if "physics_ms" in profile and "correction_ms" in profile:
        totals = np.asarray(profile["physics_ms"]) + np.asarray(profile["correction_ms"])
        metrics["timing"]["step_ms_median"] = float(np.median(totals))

    result = RunResult(record, metrics, model, out_dir)
    if out_dir is not None:
        (out_dir / "trajectory.csv").write_text(record.to_csv())
        (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2))
    return result
