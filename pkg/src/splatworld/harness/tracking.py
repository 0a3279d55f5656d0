"""Query-point tracking through Gaussian (or particle) frames."""

from __future__ import annotations

import numpy as np

from ..errors import NoGaussians
from ..geometry import quat_conjugate, quat_rotate
from ..model.embodied import EmbodiedModel


class FrameTracker:
    """Binds points to their nearest frame at creation, then transports them.

    A frame is a (position, quaternion) pair; the stored offset is expressed
    in that frame, so rigid frame motion moves the prediction rigidly.
    """

    def __init__(self, frames_x: np.ndarray, frames_q: np.ndarray, queries: np.ndarray):
        queries = np.asarray(queries, dtype=float).reshape(-1, 3)
        if frames_x.shape[0] == 0:
            raise NoGaussians("cannot bind queries to an empty frame set")
        d2 = ((queries[:, None, :] - frames_x[None, :, :]) ** 2).sum(axis=-1)
        self.frame_index = np.argmin(d2, axis=1)  # ties: lowest index
        fx = frames_x[self.frame_index]
        fq = frames_q[self.frame_index]
        self.offset = quat_rotate(quat_conjugate(fq), queries - fx)

    def predict(self, frames_x: np.ndarray, frames_q: np.ndarray) -> np.ndarray:
        fx = frames_x[self.frame_index]
        fq = frames_q[self.frame_index]
        return fx + quat_rotate(fq, self.offset)


def track_query_points(model: EmbodiedModel, queries: np.ndarray) -> FrameTracker:
    """Bind queries (given at step 0) to the nearest Gaussian's frame."""
    if model.gaussians.count == 0:
        raise NoGaussians("model has no Gaussians")
    return FrameTracker(model.gaussians.x, model.gaussians.q, queries)


def predict_queries(model: EmbodiedModel, tracker: FrameTracker) -> np.ndarray:
    return tracker.predict(model.gaussians.x, model.gaussians.q)
