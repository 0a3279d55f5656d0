"""Command-line interface: init, run, eval, ablate, render.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NonFiniteState
from ..model.correction import CorrectionConfig
from .metrics import TrajectoryRecord, metric_2d, metric_3d
from .runner import MODES, OUTPUT_ENV_VAR, run_scenario
from .scenario import BUILTIN_SCENARIOS, load_scenario


def _default_out() -> Path:
    return Path(os.environ.get(OUTPUT_ENV_VAR, "runs"))


def _apply_flags(scenario, args):
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
    if getattr(args, "resolution", None):
        w, h = (int(v) for v in args.resolution.lower().split("x"))
        if w > 640 or h > 360:
            raise ConfigError("resolution is capped at 640x360")
        scenario.cameras.width = w
        scenario.cameras.height = h
    if getattr(args, "cameras", None) is not None:
        if args.cameras < 3:
            raise ConfigError("at least 3 training cameras are required")
        scenario.cameras.train = args.cameras
        scenario.cameras.count = max(scenario.cameras.count, args.cameras + 1)
    return scenario


def _correction_from_args(args) -> CorrectionConfig:
    cfg = CorrectionConfig()
    if getattr(args, "kp", None) is not None:
        cfg.kp = args.kp
    if getattr(args, "adam_iters", None) is not None:
        cfg.adam_iterations = args.adam_iters
    return cfg


def cmd_init(args) -> int:
    out = Path(args.out) if args.out else _default_out()
    out.mkdir(parents=True, exist_ok=True)
    scenario = load_scenario(args.scenario)
    path = out / f"{scenario.name}.json"
    path.write_text(scenario.to_json())
    print(f"wrote {path}")
    return 0


def cmd_run(args) -> int:
    scenario = _apply_flags(load_scenario(args.scenario), args)
    out = Path(args.out) if args.out else _default_out() / scenario.name / args.mode
    result = run_scenario(
        scenario,
        mode=args.mode,
        out_dir=out,
        save_frames=args.save_frames,
        correction_cfg=_correction_from_args(args),
    )
    print(json.dumps(result.metrics, indent=2))
    print(f"artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    run_dir = Path(args.run_dir)
    record = TrajectoryRecord.from_csv((run_dir / "trajectory.csv").read_text())
    summary = {
        "metric_3d_cm": metric_3d(record),
        "metric_2d_px": metric_2d(record),
        "steps": record.steps,
        "points": record.points,
    }
    print(json.dumps(summary, indent=2))
    return 0


def cmd_ablate(args) -> int:
    scenario = _apply_flags(load_scenario(args.scenario), args)
    out = Path(args.out) if args.out else _default_out() / scenario.name / "ablate"
    results = {}
    if args.axis == "priors":
        values = ["corrected", "no_collisions", "no_gravity", "no_ground"]
        for mode in values:
            r = run_scenario(scenario, mode=mode, out_dir=out / mode)
            results[mode] = r.metrics["metric_3d_cm"]
    else:
        values = [float(v) for v in args.values.split(",")]
        for v in values:
            cfg = CorrectionConfig()
            label = f"{args.axis}={v:g}"
            if args.axis == "kp":
                cfg.kp = v
            elif args.axis == "adam-iters":
                cfg.adam_iterations = int(v)
            elif args.axis == "lr-position":
                cfg.lr_position = v
            else:
                raise ConfigError(f"unknown ablation axis {args.axis!r}")
            r = run_scenario(scenario, mode="corrected", out_dir=out / label, correction_cfg=cfg)
            results[label] = r.metrics["metric_3d_cm"]
    (out / "ablation.json").write_text(json.dumps(results, indent=2))
    print(json.dumps(results, indent=2))
    return 0


def cmd_render(args) -> int:
    from ..rendering.image_io import write_png
    from .reality import Reality

    scenario = _apply_flags(load_scenario(args.scenario), args)
    out = Path(args.out) if args.out else _default_out() / scenario.name / "render"
    out.mkdir(parents=True, exist_ok=True)
    reality = Reality(scenario)
    for t in range(args.steps):
        if t > 0:
            reality.advance()
        for cam in reality.cameras:
            write_png(out / f"{cam.name}_{t:04d}.png", reality.render_view(cam).rgb)
    print(f"wrote {args.steps * len(reality.cameras)} frames to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="splatworld",
        description="Dual Gaussian-particle world model: synthetic scenarios, "
        "tracking runs, and ablations.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    names = ", ".join(sorted(BUILTIN_SCENARIOS))

    pi = sub.add_parser("init", help="write a built-in scenario to JSON")
    pi.add_argument("scenario", help=f"built-in name ({names}) or JSON path")
    pi.add_argument("--out", default=None)
    pi.set_defaults(fn=cmd_init)

    pr = sub.add_parser("run", help="run a scenario and write artifacts")
    pr.add_argument("scenario", help=f"built-in name ({names}) or JSON path")
    pr.add_argument("--mode", default="corrected", choices=MODES)
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--resolution", default=None, help="WxH, e.g. 160x90")
    pr.add_argument("--cameras", type=int, default=None, help="training cameras")
    pr.add_argument("--kp", type=float, default=None, help="visual force gain")
    pr.add_argument("--adam-iters", type=int, default=None)
    pr.add_argument("--save-frames", action="store_true")
    pr.add_argument("--out", default=None)
    pr.set_defaults(fn=cmd_run)

    pe = sub.add_parser("eval", help="recompute metrics from a run directory")
    pe.add_argument("run_dir")
    pe.set_defaults(fn=cmd_eval)

    pa = sub.add_parser("ablate", help="sweep one parameter axis")
    pa.add_argument("scenario")
    pa.add_argument("--axis", required=True, choices=["kp", "adam-iters", "lr-position", "priors"])
    pa.add_argument("--values", default="", help="comma-separated values")
    pa.add_argument("--seed", type=int, default=None)
    pa.add_argument("--resolution", default=None)
    pa.add_argument("--cameras", type=int, default=None)
    pa.add_argument("--out", default=None)
    pa.set_defaults(fn=cmd_ablate)

    pv = sub.add_parser("render", help="render reference-scene frames to PNG")
    pv.add_argument("scenario")
    pv.add_argument("--steps", type=int, default=1)
    pv.add_argument("--seed", type=int, default=None)
    pv.add_argument("--resolution", default=None)
    pv.add_argument("--out", default=None)
    pv.set_defaults(fn=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NonFiniteState, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
