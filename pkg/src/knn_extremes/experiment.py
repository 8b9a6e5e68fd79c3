"""
Replicated Monte Carlo experiments.

Each replicate draws its own sample from a seed derived from
``(master_seed, replicate_id)``, so results do not depend on how replicates
are scheduled over worker processes.  Aggregation always runs over replicate
ids in ascending order.
"""

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import gammainc, gammaln

from .chenstein import (assign_subcubes, block_maxima, grid_size, local_collision_pairs,
                        occupancy_count, summarize_diagnostics, tv_distance)
from .limits import (ThresholdParams, centered_max, expected_count, exceedance_count,
                     gumbel_cdf, threshold)
from .measures import DensityModel, PointSample, content_bounds, sample_points
from .nn import kth_nn_radii

__all__ = [
    "ExperimentConfig",
    "SummaryReport",
    "replicate_seed",
    "run_replicate",
    "run_replicates",
    "run_experiment",
    "poisson_pmf",
    "tv_to_poisson",
    "ks_gumbel",
    "persist",
    "load_replicates",
    "pmf_from_counts",
    "sweep",
    "write_sweep_csv",
    "CSV_HEADER",
    "SUMMARY_KEYS",
    "SUMMARY_SCHEMA",
]

log = logging.getLogger(__name__)

CSV_HEADER = ["replicate_id", "seed", "count", "hat_count", "max_content",
              "centered_max", "occupancy_ok"]
SUMMARY_KEYS = ["config", "pmf", "mean_count", "se_count", "expected_count",
                "tv_to_poisson", "tv_se", "ks_to_gumbel", "diagnostics", "runtime_seconds"]

_NUM = {"type": "number"}
_DIAGNOSTICS_SCHEMA = {
    "type": "object",
    "required": ["b1", "b2", "b3", "bound", "occupancy_failure_rate", "rn_estimate",
                 "mismatch_rate", "epsilon", "cells_per_axis"],
    "properties": {
        "b1": {"type": "number", "minimum": 0},
        "b2": {"type": "number", "minimum": 0},
        "b3": {"const": 0},
        "bound": {"type": "number", "minimum": 0},
        "occupancy_failure_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "rn_estimate": {"type": "number", "minimum": 0},
        "mismatch_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "cells_per_axis": {"type": "integer", "minimum": 1},
        "conditioned": {"type": "object"},
    },
}
SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": SUMMARY_KEYS,
    "additionalProperties": False,
    "properties": {
        "config": {
            "type": "object",
            "required": ["dim", "n", "k", "t", "replicates", "epsilon", "density",
                         "master_seed", "chenstein_diagnostics"],
        },
        "pmf": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                "minItems": 1},
        "mean_count": _NUM,
        "se_count": {"type": "number", "minimum": 0},
        "expected_count": {"type": "number", "minimum": 0},
        "tv_to_poisson": {"type": "number", "minimum": 0, "maximum": 2},
        "tv_se": {"type": "number", "minimum": 0},
        "ks_to_gumbel": {"type": "number", "minimum": 0, "maximum": 1},
        "diagnostics": {"oneOf": [{"type": "null"}, _DIAGNOSTICS_SCHEMA]},
        "runtime_seconds": {"type": "number", "minimum": 0},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Parameters of a replicated experiment.

    ``density`` is a density specification (see
    :meth:`DensityModel.from_spec`); ``None`` means uniform on [0, 1]^dim.
    """

    n: int
    dim: int = 2
    k: int = 1
    t: float = 0.0
    replicates: int = 100
    epsilon: float = 0.5
    density: dict = None
    master_seed: int = 0
    chenstein_diagnostics: bool = False

    def __post_init__(self):
        threshold(self.n, self.k, self.t)
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit nonnegative integer")
        if self.chenstein_diagnostics and self.replicates < 100:
            raise ValueError("Chen-Stein diagnostics need at least 100 replicates")
        grid_size(self.n, self.epsilon, self.dim)
        if self.density_model.dim != self.dim:
            raise ValueError("density dimension does not match dim")

    # frozen dataclass: cached_property writes to __dict__ directly
    @cached_property
    def density_model(self):
        if self.density is None:
            return DensityModel.uniform(self.dim)
        return DensityModel.from_spec(self.density)

    @cached_property
    def grid(self):
        return grid_size(self.n, self.epsilon, self.dim)

    @property
    def params(self):
        return ThresholdParams(self.n, self.k, self.t)

    def to_json(self):
        out = {f: getattr(self, f) for f in ("dim", "n", "k", "t", "replicates", "epsilon",
                                             "master_seed", "chenstein_diagnostics")}
        out["density"] = self.density_model.to_spec()
        return out


def replicate_seed(master_seed, replicate_id):
    """64-bit seed of one replicate, a counter-based function of (master_seed, replicate_id)."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate_id),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def run_replicate(config, replicate_id, points=None):
    """
    One replicate: sample, kth-NN radii, exceedances, block statistics.

    Parameters
    ----------
    config : ExperimentConfig
    replicate_id : int
    points : array_like, optional
        Use these points instead of sampling (they must number ``config.n``).

    Returns
    -------
    ExceedanceRecord
    """
    seed = replicate_seed(config.master_seed, replicate_id)
    density = config.density_model
    if points is None:
        sample = sample_points(density, config.n, seed)
    else:
        sample = PointSample(points, seed=seed)
        if sample.n != config.n or sample.dim != config.dim:
            raise ValueError("injected points do not match the configuration")
    params = config.params
    radii = kth_nn_radii(sample, config.k)
    bounds = content_bounds(density, sample.points, radii.radii)
    record = exceedance_count(density, sample, radii, params, bounds=bounds)

    grid = config.grid
    cells = assign_subcubes(grid, sample.points[list(record.exceeding)].reshape(-1, config.dim))
    distinct, per_cell = np.unique(cells, axis=0, return_counts=True)
    hat_count = int(distinct.shape[0])
    occupied = occupancy_count(grid, sample.points)
    extra = {}
    if config.chenstein_diagnostics:
        blocks, block_hat = block_maxima(grid, density, sample, radii, params, bounds=bounds)
        if block_hat != hat_count:
            raise RuntimeError("block maxima disagree with the exceeding points")
        extra = {
            "exceeding_cells": tuple(sorted(blocks.exceeding)),
            "local_pairs": local_collision_pairs(grid, [tuple(c) for c in cells], config.k),
            "collision": bool(np.any(per_cell >= 2)),
        }
    return replace(record, hat_count=hat_count, occupancy_ok=occupied == grid.n_cells,
                   seed=seed, replicate_id=int(replicate_id), extra=extra)


def _run_chunk(args):
    config, ids = args
    return [run_replicate(config, i) for i in ids]


def run_replicates(config, ids=None, workers=1):
    """Run the given replicate ids (default: all) and return records in id order."""
    ids = list(range(config.replicates)) if ids is None else sorted(int(i) for i in ids)
    workers = max(1, int(workers or os.cpu_count() or 1))
    if workers == 1 or len(ids) < 2:
        return _run_chunk((config, ids))
    n_chunks = min(len(ids), 8 * workers)
    chunks = [c.tolist() for c in np.array_split(np.asarray(ids), n_chunks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [(config, c) for c in chunks])
        records = [r for part in parts for r in part]
    return sorted(records, key=lambda r: r.replicate_id)


def poisson_pmf(lam, cutoff=None, tail_tol=1e-12):
    """
    Poisson pmf on {0, ..., M}, evaluated in log space, and the mass beyond M.

    M defaults to the smallest integer whose tail mass is below ``tail_tol``.

    Returns
    -------
    (ndarray, float)
    """
    if not lam > 0:
        raise ValueError(f"Poisson parameter must be positive, got {lam}")
    if cutoff is None:
        cutoff = 0
        while gammainc(cutoff + 1, lam) >= tail_tol:
            cutoff += 1
    m = np.arange(int(cutoff) + 1)
    pmf = np.exp(m * math.log(lam) - lam - gammaln(m + 1))
    return pmf, float(gammainc(cutoff + 1, lam))


def pmf_from_counts(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return np.bincount(counts) / counts.size


def _tv_plugin(counts, lam, base_cutoff):
    top = max(base_cutoff, int(counts.max()))
    q, tail = poisson_pmf(lam, cutoff=top)
    p = np.bincount(counts, minlength=top + 1) / counts.size
    return tv_distance(np.append(p, 0.0), np.append(q, tail))


def tv_to_poisson(counts, lam, n_boot=200, seed=0):
    """
    Plug-in total variation (factor-2 convention) between the empirical
    law of ``counts`` and Po(lam), with a bootstrap standard error.

    Returns
    -------
    (float, float)
    """
    counts = np.asarray(counts, dtype=np.int64)
    base = poisson_pmf(lam)[0].size - 1
    tv = _tv_plugin(counts, lam, base)
    if n_boot < 2 or counts.size < 2:
        return tv, 0.0
    rng = np.random.default_rng([int(seed), 0x7B])
    boot = [_tv_plugin(rng.choice(counts, counts.size), lam, base) for _ in range(n_boot)]
    return tv, float(np.std(boot, ddof=1))


def ks_gumbel(samples):
    """Kolmogorov-Smirnov distance between the empirical law of ``samples`` and the standard Gumbel."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("need at least one sample")
    cdf = gumbel_cdf(x)
    i = np.arange(1, x.size + 1)
    return float(max(np.max(i / x.size - cdf), np.max(cdf - (i - 1) / x.size)))


@dataclass
class SummaryReport:
    config: ExperimentConfig
    pmf: list
    mean_count: float
    se_count: float
    expected_count: float
    tv_to_poisson: float
    tv_se: float
    ks_to_gumbel: float
    diagnostics: object = None
    runtime_seconds: float = 0.0
    records: list = field(default_factory=list, repr=False)

    def to_json(self):
        out = {key: getattr(self, key) for key in SUMMARY_KEYS}
        out["config"] = self.config.to_json()
        out["pmf"] = [float(p) for p in self.pmf]
        out["diagnostics"] = None if self.diagnostics is None else self.diagnostics.to_json()
        return out


def summarize(config, records, runtime_seconds=0.0):
    """Build the :class:`SummaryReport` of an ordered list of replicate records."""
    counts = np.array([r.count for r in records], dtype=np.int64)
    R = counts.size
    lam = math.exp(-config.t)
    tv, tv_se = tv_to_poisson(counts, lam, seed=config.master_seed)
    diagnostics = None
    if config.chenstein_diagnostics:
        diagnostics = summarize_diagnostics(
            config.grid, config.k,
            [r.extra["exceeding_cells"] for r in records],
            [r.occupancy_ok for r in records],
            [r.extra["local_pairs"] for r in records],
            [r.count != r.hat_count for r in records])
    return SummaryReport(
        config=config,
        pmf=pmf_from_counts(counts).tolist(),
        mean_count=float(counts.mean()),
        se_count=float(counts.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
        expected_count=expected_count(config.n, config.k, config.t),
        tv_to_poisson=tv,
        tv_se=tv_se,
        ks_to_gumbel=ks_gumbel([r.centered_max for r in records]),
        diagnostics=diagnostics,
        runtime_seconds=float(runtime_seconds),
        records=list(records),
    )


def run_experiment(config, workers=1):
    """Run all replicates of ``config`` and summarize them."""
    start = time.perf_counter()
    records = run_replicates(config, workers=workers)
    return summarize(config, records, time.perf_counter() - start)


def _csv_row(r):
    return [str(r.replicate_id), f"0x{r.seed:016x}", str(r.count), str(r.hat_count),
            format(r.max_content, ".17g"), format(r.centered_max, ".17g"),
            str(int(bool(r.occupancy_ok)))]


def persist(report, out_dir, stem="run"):
    """
    Write ``<stem>_replicates.csv`` and ``<stem>_summary.json`` into ``out_dir``.

    Returns
    -------
    (Path, Path)
    """
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{stem}_replicates.csv"
    json_path = out_dir / f"{stem}_summary.json"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(_csv_row(r) for r in report.records)
        json_path.write_text(json.dumps(report.to_json(), indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {out_dir}: {exc}") from exc
    return csv_path, json_path


def load_replicates(csv_path):
    """Read a replicate CSV back into a list of dicts with typed values."""
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise ValueError(f"{csv_path}: unexpected header {reader.fieldnames}")
            return [{
                "replicate_id": int(row["replicate_id"]),
                "seed": int(row["seed"], 16),
                "count": int(row["count"]),
                "hat_count": int(row["hat_count"]),
                "max_content": float(row["max_content"]),
                "centered_max": float(row["centered_max"]),
                "occupancy_ok": row["occupancy_ok"] == "1",
            } for row in reader]
    except OSError as exc:
        raise OSError(f"cannot read {csv_path}: {exc}") from exc


def sweep(config, n_values, workers=1):
    """Run ``config`` once per sample size in ``n_values``; reports ordered by n."""
    return [run_experiment(replace(config, n=int(n)), workers=workers)
            for n in sorted(set(int(n) for n in n_values))]


_SWEEP_FIELDS = ["n", "dim", "k", "t", "replicates", "mean_count", "se_count",
                 "expected_count", "tv_to_poisson", "tv_se", "ks_to_gumbel",
                 "b1", "b2", "bound", "mismatch_rate", "occupancy_failure_rate", "rn_estimate"]


def write_sweep_csv(reports, path):
    """One summary row per report, ordered by n."""
    path = Path(path)
    rows = []
    for rep in sorted(reports, key=lambda r: r.config.n):
        cfg = rep.config
        row = [cfg.n, cfg.dim, cfg.k, cfg.t, cfg.replicates, rep.mean_count, rep.se_count,
               rep.expected_count, rep.tv_to_poisson, rep.tv_se, rep.ks_to_gumbel]
        diag = rep.diagnostics
        row += ([diag.b1, diag.b2, diag.bound, diag.mismatch_rate,
                 diag.occupancy_failure_rate, diag.rn_estimate] if diag else [""] * 6)
        rows.append([format(x, ".17g") if isinstance(x, float) else str(x) for x in row])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_SWEEP_FIELDS)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
