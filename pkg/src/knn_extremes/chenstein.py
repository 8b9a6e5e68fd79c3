"""
Grid discretization, block maxima and Chen-Stein diagnostics.

The unit cube is cut into N^d congruent subcubes, indexed by 1-based integer
tuples, with N^d ~ n / (log n)^(1 + eps).  For every replicate the
block maximum M_j is the largest kth-NN ball content among the points in
subcube j; C_hat counts the subcubes with M_j above the threshold.  Across
replicates the exceedance frequencies give plug-in estimates of the
Chen-Stein neighborhood sums b1 and b2.

All per-subcube storage is sparse (dicts keyed by index tuples).
"""

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .limits import exceedance_count
from .measures import content_bounds

__all__ = [
    "GridSpec",
    "BlockMaxima",
    "ChenSteinDiagnostics",
    "grid_size",
    "assign_subcube",
    "assign_subcubes",
    "chebyshev_distance",
    "neighborhood",
    "occupancy_count",
    "block_maxima",
    "estimate_b_terms",
    "chen_stein_bound",
    "local_collision_pairs",
    "estimate_local_collisions",
    "indicator_correlation",
    "summarize_diagnostics",
    "tv_distance",
]


@dataclass(frozen=True)
class GridSpec:
    dim: int
    n: int
    epsilon: float
    cells_per_axis: int

    @property
    def cell_width(self):
        return 1.0 / self.cells_per_axis

    @property
    def n_cells(self):
        return self.cells_per_axis ** self.dim


def grid_size(n, epsilon=0.5, dim=2):
    """
    Grid with N subcubes per axis, N the largest integer with
    N^d <= n / (log n)^(1 + epsilon).

    Raises
    ------
    ValueError
        If n < 3, epsilon <= 0, or N < 1 ("grid degenerate").
    """
    n, dim = int(n), int(dim)
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    target = n / math.log(n) ** (1.0 + epsilon)
    cells = int(math.floor(target ** (1.0 / dim)))
    while (cells + 1) ** dim <= target:
        cells += 1
    while cells > 0 and cells ** dim > target:
        cells -= 1
    if cells < 1:
        raise ValueError(f"grid degenerate: n={n} is too small for epsilon={epsilon}, dim={dim}")
    return GridSpec(dim, n, float(epsilon), cells)


def assign_subcubes(grid, points):
    """1-based subcube indices, shape (n, d); points on the upper face go to the last cell."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != grid.dim:
        raise ValueError("point dimension does not match the grid")
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("points must lie in [0, 1]^d")
    N = grid.cells_per_axis
    return np.minimum(np.floor(pts * N).astype(np.int64) + 1, N)


def assign_subcube(grid, x):
    return tuple(int(j) for j in assign_subcubes(grid, x)[0])


def chebyshev_distance(j, j2):
    return max(abs(a - b) for a, b in zip(j, j2))


def neighborhood(grid, j, radius):
    """All subcubes within Chebyshev distance ``radius`` of ``j``, truncated to the grid."""
    N = grid.cells_per_axis
    ranges = [range(max(1, a - radius), min(N, a + radius) + 1) for a in j]
    return list(itertools.product(*ranges))


def occupancy_count(grid, points):
    """Number of distinct nonempty subcubes."""
    cells = assign_subcubes(grid, points)
    return int(np.unique(cells, axis=0).shape[0])


@dataclass
class BlockMaxima:
    """
    Sparse block maxima of one replicate.

    ``entries`` maps each occupied subcube to its M_j; empty subcubes
    (M_j = 0) are not stored.
    """

    grid: GridSpec
    threshold: float
    entries: dict
    occupancy_count: int

    @property
    def occupancy_ok(self):
        """Whether every subcube contains a sample point."""
        return self.occupancy_count == self.grid.n_cells

    @property
    def exceeding(self):
        return frozenset(j for j, m in self.entries.items() if m > self.threshold)

    @property
    def hat_count(self):
        return len(self.exceeding)


def block_maxima(grid, density, sample, radii, params, bounds=None):
    """
    Block maxima M_j over occupied subcubes and C_hat = #{j : M_j > v}.

    Exact contents are only computed where they can change a block maximum;
    balls whose bracket straddles the threshold are resolved with the same
    tightened tolerance as :func:`knn_extremes.limits.exceedance_count`.

    Returns
    -------
    (BlockMaxima, int)
    """
    if grid.dim != sample.dim or grid.n != sample.n:
        raise ValueError("grid does not match the sample")
    v = params.v
    if bounds is None:
        bounds = content_bounds(density, sample.points, radii.radii)
    straddle = np.flatnonzero((bounds.lower <= v) & (bounds.upper > v))
    bounds.resolve(straddle, atol=1e-12 * v, rtol=1e-12)

    cells = assign_subcubes(grid, sample.points)
    N = grid.cells_per_axis
    flat = np.ravel_multi_index(tuple((cells - 1).T), (N,) * grid.dim)
    order = np.lexsort((-bounds.upper, flat))
    starts = np.flatnonzero(np.r_[True, flat[order][1:] != flat[order][:-1]])
    entries = {}
    for s, e in zip(starts, np.r_[starts[1:], order.size]):
        members = order[s:e]
        best = float(bounds.lower[members].max())
        for i in members:
            if bounds.upper[i] <= best:
                break
            best = max(best, float(bounds.resolve(i)))
        entries[tuple(int(a) for a in cells[members[0]])] = best
    blocks = BlockMaxima(grid, v, entries, len(entries))
    return blocks, blocks.hat_count


def _exceed_sets(replicates, grid):
    sets = []
    threshold = None
    for rep in replicates:
        if isinstance(rep, BlockMaxima):
            if rep.grid != grid:
                raise ValueError("replicates were computed on different grids")
            if threshold is None:
                threshold = rep.threshold
            elif rep.threshold != threshold:
                raise ValueError("replicates were computed with different thresholds")
            rep = rep.exceeding
        cells = {tuple(int(a) for a in j) for j in rep}
        for j in cells:
            if len(j) != grid.dim or min(j) < 1 or max(j) > grid.cells_per_axis:
                raise ValueError(f"subcube index {j} is not on the grid")
        sets.append(cells)
    return sets


def _close_pairs(cells, radius):
    # ordered pairs (a, b) of rows of `cells` with Chebyshev distance <= radius
    if len(cells) == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = np.asarray(cells, dtype=np.int64)
    out = []
    step = max(1, 2_000_000 // max(1, len(arr)))
    for start in range(0, len(arr), step):
        block = arr[start:start + step]
        dist = np.abs(block[:, None, :] - arr[None, :, :]).max(axis=2)
        a, b = np.nonzero(dist <= radius)
        out.append(np.stack([a + start, b], axis=1))
    return np.concatenate(out)


def estimate_b_terms(replicates, grid, k, min_replicates=100):
    """
    Plug-in estimates of the Chen-Stein sums over the grid,

        b1 = sum_j sum_{j' in S(j, 2k)} p_j p_j'
        b2 = sum_j sum_{j' in S(j, 2k), j' != j} p_jj'

    where p_j and p_jj' are the empirical frequencies of {M_j > v} and
    {M_j > v, M_j' > v}.

    Parameters
    ----------
    replicates : sequence
        One entry per replicate: a :class:`BlockMaxima` or an iterable of the
        exceeding subcube indices.
    grid : GridSpec
    k : int
    min_replicates : int

    Returns
    -------
    (float, float)
    """
    sets = _exceed_sets(replicates, grid)
    R = len(sets)
    if R < min_replicates:
        raise ValueError(f"need at least {min_replicates} replicates, got {R}")
    radius = 2 * int(k)
    freq = Counter()
    joint = 0
    for cells in sets:
        freq.update(cells)
        cells = sorted(cells)
        if len(cells) > 1:
            pairs = _close_pairs(cells, radius)
            joint += int(np.count_nonzero(pairs[:, 0] != pairs[:, 1]))
    if not freq:
        return 0.0, 0.0
    keys = list(freq)
    p = np.array([freq[j] for j in keys], dtype=float) / R
    pairs = _close_pairs(keys, radius)
    b1 = float(np.sum(p[pairs[:, 0]] * p[pairs[:, 1]]))
    b2 = joint / R
    return b1, b2


def chen_stein_bound(b1, b2, b3=0.0):
    """The total-variation bound 2 (b1 + b2 + b3)."""
    if b1 < 0 or b2 < 0 or b3 < 0:
        raise ValueError("Chen-Stein terms must be nonnegative")
    return 2.0 * (b1 + b2 + b3)


def local_collision_pairs(grid, exceeding_cells, k):
    """
    max over j of e_j (e_j - 1), with e_j the number of exceeding points
    lying in S(j, 2k); ``exceeding_cells`` lists the subcube of every
    exceeding point (with repetition).
    """
    counts = Counter()
    for cell in exceeding_cells:
        for j in neighborhood(grid, tuple(int(a) for a in cell), 2 * int(k)):
            counts[j] += 1
    if not counts:
        return 0
    e = max(counts.values())
    return e * (e - 1)


def estimate_local_collisions(grid, density, sample, radii, params, bounds=None):
    """Per-replicate ordered-pair count entering the local (collision) term."""
    record = exceedance_count(density, sample, radii, params, bounds=bounds)
    idx = list(record.exceeding)
    if len(idx) < 2:
        return 0
    cells = assign_subcubes(grid, sample.points[idx])
    return local_collision_pairs(grid, [tuple(c) for c in cells], params.k)


def indicator_correlation(replicates, grid, j, j2, occupancy=None):
    """
    Empirical correlation of 1{M_j > v} and 1{M_j2 > v} over replicates.

    If ``occupancy`` flags are given, only replicates with every subcube
    occupied are used.

    Returns
    -------
    (corr, se, used) : (float, float, int)
        ``corr`` is 0 when either indicator never varies; ``se`` is 1/sqrt(used).
    """
    sets = _exceed_sets(replicates, grid)
    if occupancy is not None:
        sets = [s for s, ok in zip(sets, occupancy) if ok]
    used = len(sets)
    if used < 2:
        raise ValueError("need at least two usable replicates")
    a = np.array([tuple(j) in s for s in sets], dtype=float)
    b = np.array([tuple(j2) in s for s in sets], dtype=float)
    if a.std() == 0 or b.std() == 0:
        return 0.0, 1.0 / math.sqrt(used), used
    return float(np.corrcoef(a, b)[0, 1]), 1.0 / math.sqrt(used), used


@dataclass
class ChenSteinDiagnostics:
    b1: float
    b2: float
    b3: float
    bound: float
    occupancy_failure_rate: float
    rn_estimate: float
    mismatch_rate: float
    epsilon: float
    cells_per_axis: int
    conditioned: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)


def summarize_diagnostics(grid, k, exceed_sets, occupancy, local_pairs, mismatches,
                          min_replicates=100):
    """
    Aggregate per-replicate diagnostics.

    b-terms are reported unconditionally and, under ``conditioned``,
    restricted to the replicates in which every subcube is occupied.
    """
    R = len(exceed_sets)
    if not (len(occupancy) == len(local_pairs) == len(mismatches) == R):
        raise ValueError("per-replicate diagnostic arrays differ in length")
    b1, b2 = estimate_b_terms(exceed_sets, grid, k, min_replicates=min_replicates)
    kept = [s for s, ok in zip(exceed_sets, occupancy) if ok]
    if len(kept) >= min_replicates:
        cb1, cb2 = estimate_b_terms(kept, grid, k, min_replicates=min_replicates)
        conditioned = {"b1": cb1, "b2": cb2, "b3": 0.0, "bound": chen_stein_bound(cb1, cb2),
                       "replicates": len(kept), "discarded": R - len(kept)}
    else:
        conditioned = {"b1": None, "b2": None, "b3": 0.0, "bound": None,
                       "replicates": len(kept), "discarded": R - len(kept)}
    return ChenSteinDiagnostics(
        b1=b1, b2=b2, b3=0.0, bound=chen_stein_bound(b1, b2),
        occupancy_failure_rate=1.0 - float(np.mean(occupancy)),
        rn_estimate=float(np.mean(local_pairs)),
        mismatch_rate=float(np.mean(mismatches)),
        epsilon=grid.epsilon, cells_per_axis=grid.cells_per_axis,
        conditioned=conditioned)


def _as_pmf(pmf):
    if isinstance(pmf, dict):
        size = max(int(m) for m in pmf) + 1 if pmf else 0
        out = np.zeros(size)
        for m, p in pmf.items():
            out[int(m)] = p
        return out
    return np.asarray(pmf, dtype=float)


def tv_distance(pmf_a, pmf_b):
    """
    Total variation between two pmfs on {0, 1, 2, ...}, with the factor-2
    convention: sum_m |p_m - q_m|, a value in [0, 2].

    Either argument may be a sequence (index = atom) or a dict atom -> mass.
    """
    a, b = _as_pmf(pmf_a), _as_pmf(pmf_b)
    for p in (a, b):
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("pmf must be nonnegative and sum to 1")
    size = max(a.size, b.size)
    a = np.pad(a, (0, size - a.size))
    b = np.pad(b, (0, size - b.size))
    return float(np.abs(a - b).sum())
