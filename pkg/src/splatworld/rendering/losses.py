"""L1 image losses, summed over pixels and channels."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch


def _masked_l1(rendered, observed, mask):
    rendered = np.asarray(rendered, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if rendered.shape != observed.shape:
        raise DimensionMismatch(f"{rendered.shape} vs {observed.shape}")
    diff = np.abs(rendered - observed)
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != rendered.shape[:2]:
            raise DimensionMismatch(f"mask {mask.shape} vs image {rendered.shape[:2]}")
        diff = diff[mask != 0]
    return float(diff.sum())


def loss_rgb(rendered: np.ndarray, observed: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Sum over pixels and channels of |C - C_gt|, optionally masked."""
    return _masked_l1(rendered, observed, mask)


def loss_seg(rendered: np.ndarray, observed: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Same as loss_rgb but over segmentation channels."""
    return _masked_l1(rendered, observed, mask)
