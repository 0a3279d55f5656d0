"""Synthetic scenarios, reference-scene streaming, metrics, and the CLI."""

from .metrics import TrajectoryRecord, metric_2d, metric_3d, metric_psnr
from .reality import Reality
from .runner import RunResult, build_model_from_observations, run_scenario
from .scenario import BUILTIN_SCENARIOS, Scenario, load_scenario
from .tracking import FrameTracker, predict_queries, track_query_points

__all__ = [
    "BUILTIN_SCENARIOS",
    "FrameTracker",
    "Reality",
    "RunResult",
    "Scenario",
    "TrajectoryRecord",
    "build_model_from_observations",
    "load_scenario",
    "metric_2d",
    "metric_3d",
    "metric_psnr",
    "predict_queries",
    "run_scenario",
    "track_query_points",
]
