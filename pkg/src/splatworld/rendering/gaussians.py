"""Gaussian set stored as flat arrays (positions, rotations, scales, ...)."""

from __future__ import annotations

import numpy as np

from ..geometry import IDENTITY_QUAT, quat_normalize

_LOGIT_LIMIT = 40.0  # sigmoid saturates to exactly 0.0/1.0 in float64 beyond this


def opacity_to_logit(a: np.ndarray) -> np.ndarray:
    a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        return np.clip(np.log(a) - np.log1p(-a), -_LOGIT_LIMIT, _LOGIT_LIMIT)


def logit_to_opacity(logit: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.asarray(logit, dtype=float)))


class GaussianSet:
    """Structure-of-arrays Gaussian collection.

    Opacity is stored through a logistic reparameterization so optimization
    keeps it inside [0, 1] without clamping artifacts; `opacity` exposes the
    actual value. `seg` holds per-object segmentation channel weights
    (one-hot for object Gaussians, zero rows for background). `parent` is
    the bonded particle index, -1 when unbonded.
    """

    def __init__(
        self,
        x: np.ndarray,
        q: np.ndarray | None = None,
        scale: np.ndarray | float = 0.005,
        opacity: np.ndarray | float = 0.5,
        color: np.ndarray | None = None,
        seg: np.ndarray | None = None,
        parent: np.ndarray | None = None,
        seg_channels: int = 0,
    ):
        self.x = np.array(x, dtype=float).reshape(-1, 3)
        m = self.x.shape[0]
        self.q = (
            quat_normalize(np.array(q, dtype=float).reshape(-1, 4))
            if q is not None
            else np.tile(IDENTITY_QUAT, (m, 1))
        )
        self.scale = np.array(scale, dtype=float) * np.ones((m, 3))
        if np.any(self.scale <= 0):
            raise ValueError("scales must be positive")
        self.opacity_logit = opacity_to_logit(np.asarray(opacity, dtype=float) * np.ones(m))
        self.color = (
            np.clip(np.array(color, dtype=float).reshape(-1, 3), 0.0, 1.0) * np.ones((m, 3))
            if color is not None
            else np.full((m, 3), 0.5)
        )
        if seg is not None:
            self.seg = np.array(seg, dtype=float).reshape(m, -1)
        else:
            self.seg = np.zeros((m, seg_channels))
        self.parent = (
            np.array(parent, dtype=np.int64).reshape(-1)
            if parent is not None
            else np.full(m, -1, dtype=np.int64)
        )

    @property
    def count(self) -> int:
        return self.x.shape[0]

    @property
    def seg_channels(self) -> int:
        return self.seg.shape[1]

    @property
    def opacity(self) -> np.ndarray:
        return logit_to_opacity(self.opacity_logit)

    @opacity.setter
    def opacity(self, a):
        self.opacity_logit = opacity_to_logit(np.asarray(a, dtype=float) * np.ones(self.count))

    def copy(self) -> "GaussianSet":
        out = GaussianSet.__new__(GaussianSet)
        for name, val in self.__dict__.items():
            setattr(out, name, val.copy())
        return out

    def select(self, idx) -> "GaussianSet":
        out = GaussianSet.__new__(GaussianSet)
        for name, val in self.__dict__.items():
            setattr(out, name, val[idx].copy())
        return out

    @staticmethod
    def concatenate(sets: list["GaussianSet"]) -> "GaussianSet":
        if not sets:
            raise ValueError("nothing to concatenate")
        k = max(s.seg_channels for s in sets)
        out = GaussianSet.__new__(GaussianSet)
        out.x = np.concatenate([s.x for s in sets])
        out.q = np.concatenate([s.q for s in sets])
        out.scale = np.concatenate([s.scale for s in sets])
        out.opacity_logit = np.concatenate([s.opacity_logit for s in sets])
        out.color = np.concatenate([s.color for s in sets])
        segs = []
        for s in sets:
            pad = np.zeros((s.count, k))
            pad[:, : s.seg_channels] = s.seg
            segs.append(pad)
        out.seg = np.concatenate(segs)
        out.parent = np.concatenate([s.parent for s in sets])
        return out
