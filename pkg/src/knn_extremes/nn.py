"""
Exact kth-nearest-neighbor radii.

:func:`kth_nn_radii` uses a k-d tree to find candidate neighbors and then
recomputes every candidate distance with the same arithmetic as the
all-pairs oracle :func:`brute_force_radii`, so both return bitwise-equal
radii.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .measures import PointSample

__all__ = ["NeighborRadii", "kth_nn_radii", "brute_force_radii", "pairwise_distance"]

# extra tree candidates guarding against rounding-level reorderings
_MARGIN = 2


@dataclass
class NeighborRadii:
    """radii[i] is the distance from point i to its kth-nearest other point."""

    k: int
    radii: np.ndarray

    @property
    def n(self):
        return self.radii.shape[0]


def pairwise_distance(a, b):
    """Euclidean distance along the last axis, accumulated coordinate by coordinate."""
    acc = (a[..., 0] - b[..., 0]) ** 2
    for m in range(1, a.shape[-1]):
        acc = acc + (a[..., m] - b[..., m]) ** 2
    return np.sqrt(acc)


def _as_points(sample):
    if isinstance(sample, PointSample):
        return sample.points
    pts = np.asarray(sample, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def _check_k(n, k):
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n - 1, got k={k} with n={n}")


def kth_nn_radii(sample, k, workers=1):
    """
    kth-nearest-neighbor radius of every point of ``sample``.

    Parameters
    ----------
    sample : PointSample or array_like, shape (n, d)
    k : int
        Neighbor order, ``1 <= k <= n - 1``.
    workers : int
        Threads used by the tree query (results do not depend on it).

    Returns
    -------
    NeighborRadii
    """
    pts = _as_points(sample)
    n = pts.shape[0]
    k = int(k)
    _check_k(n, k)
    kk = min(n, k + 1 + _MARGIN)
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=kk, workers=workers)
    idx = idx.reshape(n, kk)
    dist = pairwise_distance(pts[:, None, :], pts[idx])
    dist[idx == np.arange(n)[:, None]] = np.inf
    radii = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return NeighborRadii(k, radii)


def brute_force_radii(sample, k, chunk=512):
    """All-pairs oracle for :func:`kth_nn_radii`; memory is O(chunk * n)."""
    pts = _as_points(sample)
    n = pts.shape[0]
    k = int(k)
    _check_k(n, k)
    radii = np.empty(n)
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        dist = pairwise_distance(pts[rows, None, :], pts[None, :, :])
        dist[np.arange(rows.size), rows] = np.inf
        radii[rows] = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return NeighborRadii(k, radii)
