"""
Exceedance statistics of kth-nearest-neighbor ball contents and their closed forms.

With v = threshold(n, k, t), the exceedance count is

    C = #{i : mu(B(X_i, R_{i,n,k})) > v},

whose expectation is n * P(U_{k:n-1} > v) = n * binomial_tail(n - 1, k, v)
for every continuous distribution, and whose Poisson limit has mean e^{-t}.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .measures import content_bounds

__all__ = [
    "ThresholdParams",
    "ExceedanceRecord",
    "threshold",
    "binomial_tail",
    "expected_count",
    "exceedance_probability",
    "exceedance_count",
    "centered_max",
    "gumbel_cdf",
]


def _offset(n, k):
    # log n + (k - 1) log log n - log (k - 1)!
    return math.log(n) + (k - 1) * math.log(math.log(n)) - math.lgamma(k)


def threshold(n, k, t):
    """
    The exceedance threshold (t + log n + (k-1) log log n - log (k-1)!) / n.

    Raises
    ------
    ValueError
        If n < 3, k is outside [1, n - 1], or the threshold falls outside (0, 1)
        (n too small for the chosen k and t).
    """
    n, k = int(n), int(k)
    if n < 3:
        raise ValueError(f"n must be >= 3 so that log log n > 0, got {n}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n - 1, got k={k} with n={n}")
    v = (t + _offset(n, k)) / n
    if not 0.0 < v < 1.0:
        raise ValueError(f"threshold out of range: v={v:.6g} for n={n}, k={k}, t={t}")
    return v


@dataclass(frozen=True)
class ThresholdParams:
    """Sample size, neighbor order and threshold offset; validated on creation."""

    n: int
    k: int
    t: float = 0.0

    def __post_init__(self):
        threshold(self.n, self.k, self.t)

    @property
    def v(self):
        return threshold(self.n, self.k, self.t)


def binomial_tail(m, k, s):
    """
    P(U_{k:m} > s) = sum_{j<k} C(m, j) s^j (1-s)^(m-j), for the kth order
    statistic of m i.i.d. uniforms; summed in log space.
    """
    m, k = int(m), int(k)
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    if s == 0.0:
        return 1.0
    if s == 1.0:
        return 0.0
    j = np.arange(k)
    # log C(m, j) as a running sum of log((m - i) / (i + 1)); lgamma differences
    # lose about log10(m log m) digits to cancellation
    log_binom = np.concatenate([[0.0], np.cumsum(np.log((m - j[:-1]) / (j[:-1] + 1.0)))])
    logs = log_binom + j * math.log(s) + (m - j) * math.log1p(-s)
    return float(min(1.0, math.exp(logsumexp(logs))))


def exceedance_probability(n, k, t):
    """P(mu(B(X_1, R_{1,n,k})) > v): the same for every continuous distribution."""
    return binomial_tail(n - 1, k, threshold(n, k, t))


def expected_count(n, k, t):
    """Exact finite-n expectation of the exceedance count."""
    return n * exceedance_probability(n, k, t)


def centered_max(params, max_content):
    """n P - log n - (k-1) log log n + log (k-1)!; at most t exactly when no exceedance occurs."""
    return params.n * max_content - _offset(params.n, params.k)


def gumbel_cdf(t):
    """Standard Gumbel distribution function exp(-exp(-t))."""
    return np.exp(-np.exp(-np.asarray(t, dtype=float)))


@dataclass
class ExceedanceRecord:
    """
    Per-replicate statistics.

    ``count`` is C, ``hat_count`` the number of grid subcubes hosting an
    exceedance, ``max_content`` the largest ball content P and
    ``centered_max`` its centered version.  ``exceeding`` holds the indices
    of the exceeding points and ``extra`` optional diagnostics; neither is
    written to the replicate CSV.
    """

    count: int
    max_content: float
    centered_max: float
    hat_count: int = -1
    occupancy_ok: bool = False
    seed: int = 0
    replicate_id: int = 0
    exceeding: tuple = field(default=(), compare=False, repr=False)
    extra: dict = field(default_factory=dict, compare=False, repr=False)


def exceedance_count(density, sample, radii, params, bounds=None):
    """
    Count the kth-NN balls whose content exceeds the threshold, and the maximum content.

    Contents are first bracketed cheaply (see
    :func:`knn_extremes.measures.content_bounds`); quadrature is only used for
    balls whose bracket straddles the threshold, with the tolerance tightened
    to 1e-12 v, and for the candidates that can still be the maximum.

    Parameters
    ----------
    density : DensityModel
    sample : PointSample
    radii : NeighborRadii
        Computed from ``sample`` with ``k == params.k``.
    params : ThresholdParams
    bounds : ContentBounds, optional
        Reused if given (it is updated in place).

    Returns
    -------
    ExceedanceRecord
        With ``count``, ``max_content``, ``centered_max`` and ``exceeding`` set.
    """
    if radii.k != params.k:
        raise ValueError(f"radii were computed for k={radii.k}, params have k={params.k}")
    if radii.n != sample.n or sample.n != params.n:
        raise ValueError("sample, radii and params disagree on n")
    v = params.v
    if bounds is None:
        bounds = content_bounds(density, sample.points, radii.radii)

    straddle = np.flatnonzero((bounds.lower <= v) & (bounds.upper > v))
    bounds.resolve(straddle, atol=1e-12 * v, rtol=1e-12)
    exceeding = np.flatnonzero(bounds.lower > v)

    order = np.argsort(-bounds.upper, kind="stable")
    best = float(bounds.lower.max())
    for i in order:
        if bounds.upper[i] <= best:
            break
        best = max(best, float(bounds.resolve(i)))

    count = int(exceeding.size)
    return ExceedanceRecord(count=count, max_content=best,
                            centered_max=centered_max(params, best),
                            exceeding=tuple(int(i) for i in exceeding))
