"""Tracking and reconstruction metrics plus the trajectory record format."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyRecord

PSNR_CAP_DB = 99.0


@dataclass
class TrajectoryRecord:
    """Per-step, per-query ground-truth and predicted trajectories.

    gt3d/pred3d: (T, P, 3) meters. gt2d/pred2d: (T, P, C, 2) pixels over C
    cameras (rig order).
    """

    gt3d: np.ndarray
    pred3d: np.ndarray
    gt2d: np.ndarray
    pred2d: np.ndarray
    camera_names: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.gt3d.shape[0]

    @property
    def points(self) -> int:
        return self.gt3d.shape[1]

    @property
    def cameras(self) -> int:
        return self.gt2d.shape[2]

    def validate(self):
        if self.gt3d.size == 0:
            raise EmptyRecord("trajectory record is empty")
        if self.gt3d.shape != self.pred3d.shape or self.gt2d.shape != self.pred2d.shape:
            raise EmptyRecord("record arrays disagree in shape")
        return self

    def to_csv(self) -> str:
        self.validate()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["step", "point_id", "gt_x", "gt_y", "gt_z", "pred_x", "pred_y", "pred_z"]
        names = self.camera_names or [f"cam{c}" for c in range(self.cameras)]
        for name in names:
            header += [f"{name}_gt_u", f"{name}_gt_v", f"{name}_pred_u", f"{name}_pred_v"]
        writer.writerow(header)
        for t in range(self.steps):
            for p in range(self.points):
                row = [t, p] + [repr(v) for v in self.gt3d[t, p]] + [
                    repr(v) for v in self.pred3d[t, p]
                ]
                for c in range(self.cameras):
                    row += [repr(self.gt2d[t, p, c, 0]), repr(self.gt2d[t, p, c, 1])]
                    row += [repr(self.pred2d[t, p, c, 0]), repr(self.pred2d[t, p, c, 1])]
                writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrajectoryRecord":
        rows = list(csv.reader(io.StringIO(text)))
        header, rows = rows[0], rows[1:]
        n_cams = (len(header) - 8) // 4
        names = [header[8 + 4 * c].rsplit("_gt_u", 1)[0] for c in range(n_cams)]
        steps = max(int(r[0]) for r in rows) + 1
        points = max(int(r[1]) for r in rows) + 1
        gt3d = np.zeros((steps, points, 3))
        pred3d = np.zeros((steps, points, 3))
        gt2d = np.zeros((steps, points, n_cams, 2))
        pred2d = np.zeros((steps, points, n_cams, 2))
        for r in rows:
            t, p = int(r[0]), int(r[1])
            gt3d[t, p] = [float(v) for v in r[2:5]]
            pred3d[t, p] = [float(v) for v in r[5:8]]
            for c in range(n_cams):
                base = 8 + 4 * c
                gt2d[t, p, c] = [float(r[base]), float(r[base + 1])]
                pred2d[t, p, c] = [float(r[base + 2]), float(r[base + 3])]
        return cls(gt3d, pred3d, gt2d, pred2d, names)


def metric_3d(record: TrajectoryRecord) -> float:
    """Mean Euclidean tracking error over points and steps, in centimeters."""
    record.validate()
    err = np.linalg.norm(record.pred3d - record.gt3d, axis=-1)
    return float(err.mean() * 100.0)


def metric_2d(record: TrajectoryRecord) -> float:
    """Mean pixel error over points, steps, and cameras."""
    record.validate()
    if record.gt2d.size == 0:
        raise EmptyRecord("record has no 2D projections")
    err = np.linalg.norm(record.pred2d - record.gt2d, axis=-1)
    return float(err.mean())


def metric_psnr(renders: list, gt_images: list, fg_masks: list) -> float:
    """Foreground PSNR in dB: 10*log10(1 / MSE) over masked pixels.

    Inputs are parallel lists of (H, W, 3) float images in [0, 1] and
    (H, W) boolean masks. Perfect agreement is capped at 99 dB.
    """
    if not renders:
        raise EmptyRecord("no images to evaluate")
    se = 0.0
    count = 0
    for img, gt, mask in zip(renders, gt_images, fg_masks):
        d = np.asarray(img, dtype=float) - np.asarray(gt, dtype=float)
        m = np.asarray(mask, dtype=bool)
        se += float((d[m] ** 2).sum())
        count += int(m.sum()) * 3
    if count == 0:
        raise EmptyRecord("foreground masks are empty")
    mse = se / count
    if mse <= 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))
