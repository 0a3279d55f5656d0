"""Uniform hash-grid broad phase for sphere particles."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _collect_pairs(
    x,
    radius,
    body_id,
    body_collide,
    sorted_idx,
    sorted_keys,
    cells,
    dims,
    margin,
):
    n = x.shape[0]
    cap = max(16, 8 * n)
    out = np.empty((cap, 2), np.int64)
    count = 0
    nyz = dims[1] * dims[2]
    for a in range(n):
        ca0, ca1, ca2 = cells[a, 0], cells[a, 1], cells[a, 2]
        for dx in range(-1, 2):
            c0 = ca0 + dx
            if c0 < 0 or c0 >= dims[0]:
                continue
            for dy in range(-1, 2):
                c1 = ca1 + dy
                if c1 < 0 or c1 >= dims[1]:
                    continue
                for dz in range(-1, 2):
                    c2 = ca2 + dz
                    if c2 < 0 or c2 >= dims[2]:
                        continue
                    key = c0 * nyz + c1 * dims[2] + c2
                    lo = np.searchsorted(sorted_keys, key)
                    hi = np.searchsorted(sorted_keys, key + 1)
                    for t in range(lo, hi):
                        b = sorted_idx[t]
                        if b <= a:
                            continue
                        if body_id[a] == body_id[b] and body_collide[body_id[a]] == 0:
                            continue
                        d0 = x[a, 0] - x[b, 0]
                        d1 = x[a, 1] - x[b, 1]
                        d2 = x[a, 2] - x[b, 2]
                        dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                        if dist < radius[a] + radius[b] + margin:
                            if count == cap:
                                cap *= 2
                                grown = np.empty((cap, 2), np.int64)
                                grown[:count] = out[:count]
                                out = grown
                            out[count, 0] = a
                            out[count, 1] = b
                            count += 1
    return out[:count]


def broad_phase(
    x: np.ndarray,
    radius: np.ndarray,
    body_id: np.ndarray | None = None,
    body_self_collide: np.ndarray | None = None,
    margin: float | None = None,
) -> np.ndarray:
    """Candidate collision pairs, exact against the distance predicate.

    Returns an (P, 2) int array of pairs i < j with |xi - xj| < ri + rj +
    margin, sorted by (i, j). margin defaults to the maximum radius. Pairs
    inside the same body are dropped when that body's self-collide flag is
    false (default: self collisions enabled).
    """
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    radius = np.asarray(radius, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if body_id is None:
        body_id = np.zeros(n, dtype=np.int64)
    body_id = np.asarray(body_id, dtype=np.int64)
    n_bodies = int(body_id.max()) + 1 if n else 1
    if body_self_collide is None:
        body_collide = np.ones(n_bodies, dtype=np.int64)
    else:
        body_collide = np.asarray(body_self_collide, dtype=np.int64).reshape(-1)
        if body_collide.size < n_bodies:
            raise ValueError("body_self_collide shorter than number of bodies")
    max_r = float(radius.max())
    if margin is None:
        margin = max_r
    cell_size = 2.0 * max_r + margin
    mins = x.min(axis=0)
    cells = np.floor((x - mins) / cell_size).astype(np.int64)
    dims = cells.max(axis=0) + 1
    keys = (cells[:, 0] * dims[1] + cells[:, 1]) * dims[2] + cells[:, 2]
    order = np.argsort(keys, kind="stable")
    pairs = _collect_pairs(
        x,
        radius,
        body_id,
        body_collide,
        order,
        keys[order],
        cells,
        dims,
        float(margin),
    )
    if pairs.shape[0] > 1:
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    return pairs
