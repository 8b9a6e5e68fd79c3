"""
Bounded densities on the unit cube, point sampling and ball probability contents.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import ball_box_intersection, unit_ball_volume

__all__ = [
    "DensityModel",
    "PointSample",
    "ContentBounds",
    "sample_points",
    "mu_ball",
    "inverse_radius",
    "content_bounds",
]

log = logging.getLogger(__name__)


class DensityModel:
    """
    A density on [0, 1]^d that is bounded and bounded away from zero.

    Two kinds are supported: ``"uniform"`` and ``"piecewise"``, the latter
    being constant on each cell of a regular ``m^d`` grid.  Use the
    :meth:`uniform` / :meth:`piecewise` constructors or :meth:`from_spec`.

    Attributes
    ----------
    dim : int
    kind : str
    cells_per_axis : int
        ``m``; 1 for the uniform density.
    weights : ndarray, shape (m,) * dim
        Density value on each cell, normalized so the density integrates to 1.
    f_minus, f_plus : float
        Lower and upper density bounds.
    """

    def __init__(self, dim, kind="uniform", weights=None):
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        if kind not in ("uniform", "piecewise"):
            raise ValueError(f"unknown density kind {kind!r}")
        if kind == "uniform":
            weights = np.ones((1,) * dim)
        else:
            weights = np.array(weights, dtype=float)
            m = round(weights.size ** (1.0 / dim))
            if weights.ndim == 1 and m ** dim == weights.size:
                weights = weights.reshape((m,) * dim)
            if m < 1 or weights.shape != (m,) * dim:
                raise ValueError(f"piecewise weights must have m^{dim} entries")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("piecewise weights must be finite and strictly positive")
            mass = weights.sum() / weights.size
            if abs(mass - 1.0) > 1e-6:
                log.warning("density weights integrate to %.8g; normalizing", mass)
            weights = weights / mass
        weights.setflags(write=False)
        self.dim = dim
        self.kind = kind
        self.weights = weights
        self.cells_per_axis = weights.shape[0]
        self.f_minus = float(weights.min())
        self.f_plus = float(weights.max())
        self._cdf = np.cumsum(weights.ravel()) / weights.sum()

    @classmethod
    def uniform(cls, dim):
        return cls(dim, "uniform")

    @classmethod
    def piecewise(cls, weights, dim=None):
        weights = np.asarray(weights, dtype=float)
        return cls(weights.ndim if dim is None else dim, "piecewise", weights)

    @classmethod
    def from_spec(cls, spec):
        """
        Build from a mapping ``{"dim", "kind", "m", "weights"}``, a JSON string,
        or a path to a JSON file.
        """
        if isinstance(spec, (str, Path)):
            text = str(spec)
            if not text.lstrip().startswith("{"):
                text = Path(spec).read_text()
            spec = json.loads(text)
        kind = spec.get("kind", "uniform")
        dim = int(spec["dim"])
        if kind == "uniform":
            return cls.uniform(dim)
        m = int(spec["m"])
        weights = np.asarray(spec["weights"], dtype=float)
        if weights.size != m ** dim:
            raise ValueError(f"expected {m ** dim} weights for m={m}, dim={dim}, got {weights.size}")
        return cls(dim, "piecewise", weights.reshape((m,) * dim))

    def to_spec(self):
        if self.kind == "uniform":
            return {"dim": self.dim, "kind": "uniform"}
        return {"dim": self.dim, "kind": "piecewise", "m": self.cells_per_axis,
                "weights": self.weights.ravel().tolist()}

    def __eq__(self, other):
        return (isinstance(other, DensityModel) and self.dim == other.dim
                and self.kind == other.kind and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        if self.kind == "uniform":
            return f"DensityModel.uniform({self.dim})"
        return (f"DensityModel(dim={self.dim}, kind='piecewise', m={self.cells_per_axis}, "
                f"f_minus={self.f_minus:.4g}, f_plus={self.f_plus:.4g})")

    def cell_box(self, index):
        """Lower and upper corners of the cell with (0-based) multi-index ``index``."""
        h = 1.0 / self.cells_per_axis
        lo = np.asarray(index, dtype=float) * h
        return lo, np.minimum(lo + h, 1.0)


@dataclass
class PointSample:
    """n points in [0, 1]^d together with the seed that produced them."""

    points: np.ndarray
    seed: int = 0
    redraws: int = field(default=0, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be an (n, d) array with n >= 1")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("points must lie in [0, 1]^d")
        self.points = pts

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __eq__(self, other):
        return (isinstance(other, PointSample) and self.seed == other.seed
                and np.array_equal(self.points, other.points))


def _draw(density, n, rng):
    if density.kind == "uniform":
        return rng.random((n, density.dim))
    m = density.cells_per_axis
    flat = np.searchsorted(density._cdf, rng.random(n), side="right")
    flat = np.minimum(flat, density._cdf.size - 1)
    cells = np.stack(np.unravel_index(flat, (m,) * density.dim), axis=1)
    return (cells + rng.random((n, density.dim))) / m


def sample_points(density, n, seed):
    """
    Draw n i.i.d. points from ``density``.

    The output is a deterministic function of ``(density, n, seed)``.  Exact
    duplicate points (possible in floating point only) are redrawn; the
    number of redraws is recorded on the sample.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    pts = _draw(density, n, rng)
    redraws = 0
    while True:
        _, first = np.unique(pts, axis=0, return_index=True)
        if first.size == n:
            break
        dup = np.setdiff1d(np.arange(n), first)
        pts[dup] = _draw(density, dup.size, rng)
        redraws += dup.size
    return PointSample(pts, seed=seed, redraws=redraws)


def mu_ball(density, center, r, rtol=1e-9, atol=1e-12):
    """Probability content mu(B(center, r)) of a closed ball."""
    center = np.asarray(center, dtype=float).ravel()
    if center.size != density.dim:
        raise ValueError("center dimension does not match the density")
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    if r == 0:
        return 0.0
    d = density.dim
    if density.kind == "uniform":
        return min(ball_box_intersection(center, r, np.zeros(d), np.ones(d), rtol, atol), 1.0)
    m = density.cells_per_axis
    first = np.clip(np.floor((center - r) * m).astype(int), 0, m - 1)
    last = np.clip(np.floor((center + r) * m).astype(int), 0, m - 1)
    total = 0.0
    for index in itertools.product(*(range(a, b + 1) for a, b in zip(first, last))):
        lo, hi = density.cell_box(index)
        total += density.weights[index] * ball_box_intersection(center, r, lo, hi, rtol, atol)
    return min(total, 1.0)


def inverse_radius(density, center, p, tol=1e-10):
    """
    Smallest radius whose ball around ``center`` carries probability ``p``.

    Bisection on the continuous nondecreasing map r -> mu(B(center, r)),
    stopped once the content is within ``tol`` of ``p``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    center = np.asarray(center, dtype=float).ravel()
    lo, hi = 0.0, math.sqrt(density.dim)
    mid = hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = mu_ball(density, center, mid, rtol=1e-13, atol=1e-14)
        if abs(value - p) <= 0.1 * tol:
            break
        if value > p:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16:
            break
    return mid


class ContentBounds:
    """
    Cheap two-sided bounds on mu(B(x_i, r_i)) for a batch of balls.

    ``lower[i] == upper[i]`` marks a content already known exactly (fast
    paths); :meth:`resolve` replaces the bounds of the requested balls by
    quadrature values.
    """

    def __init__(self, density, centers, radii, lower, upper):
        self.density = density
        self.centers = centers
        self.radii = radii
        self.lower = lower
        self.upper = upper

    @property
    def exact(self):
        return self.lower == self.upper

    def resolve(self, indices, atol=1e-12, rtol=1e-9):
        for i in np.atleast_1d(indices):
            if self.lower[i] == self.upper[i]:
                continue
            value = mu_ball(self.density, self.centers[i], self.radii[i], rtol=rtol, atol=atol)
            # quadrature error is far below the width of any bound interval
            value = min(max(value, self.lower[i]), self.upper[i])
            self.lower[i] = self.upper[i] = value
        return self.lower[indices]

    def values(self):
        """Exact contents of every ball."""
        self.resolve(np.flatnonzero(~self.exact))
        return self.lower.copy()


def content_bounds(density, centers, radii):
    """
    Vectorized bounds on the contents of the balls B(centers[i], radii[i]).

    Balls inside the cube (and, for piecewise densities, inside a single
    cell) get their exact content kappa_d r^d (times the cell weight);
    balls covering the cube get 1.
    """
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    d = density.dim
    vol = unit_ball_volume(d) * radii ** d
    face = np.minimum(centers, 1.0 - centers).min(axis=1)
    corner = np.sqrt((np.maximum(centers, 1.0 - centers) ** 2).sum(axis=1))
    interior = radii <= face
    covers = radii >= corner
    # the orthant of the ball facing the cube's far side lies in the cube
    # as long as the radius is at most 1/2
    base_lower = unit_ball_volume(d) * np.minimum(radii, 0.5) ** d / 2 ** d

    if density.kind == "uniform":
        lower = np.where(interior, vol, base_lower)
        upper = np.where(interior, vol, np.minimum(vol, 1.0))
    else:
        m = density.cells_per_axis
        first = np.clip(np.floor((centers - radii[:, None]) * m).astype(int), 0, m - 1)
        last = np.clip(np.floor((centers + radii[:, None]) * m).astype(int), 0, m - 1)
        wmax = np.zeros(radii.shape)
        for index in itertools.product(range(m), repeat=d):
            idx = np.asarray(index)
            hit = np.all((first <= idx) & (idx <= last), axis=1)
            wmax = np.where(hit, np.maximum(wmax, density.weights[index]), wmax)
        single = interior & np.all(first == last, axis=1)
        w_single = density.weights[tuple(first.T)]
        lower = np.where(single, w_single * vol, density.f_minus * base_lower)
        upper = np.where(single, w_single * vol, np.minimum(wmax * vol, 1.0))
    lower = np.where(covers, 1.0, lower)
    upper = np.where(covers, 1.0, upper)
    lower = np.where(radii == 0.0, 0.0, lower)
    upper = np.where(radii == 0.0, 0.0, upper)
    return ContentBounds(density, centers, radii, lower, upper)
