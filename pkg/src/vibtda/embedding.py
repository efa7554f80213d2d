"""Delay embedding of scalar series, parameter heuristics and point-cloud utilities."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class EmbeddingParams:
    tau: int
    dim: int

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim}")
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def span(self) -> int:
        """Samples spanned by one embedded point, minus one."""
        return self.tau * (self.dim - 1)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("point cloud must be a non-empty (N, dim) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud has non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.dim)])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path: str | Path) -> "PointCloud":
        return cls(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))


def _series(series) -> np.ndarray:
    x = np.asarray(getattr(series, "samples", series), dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("series has non-finite values")
    return x


def takens_embed(series, params: EmbeddingParams) -> PointCloud:
    """Point ``i`` is ``(x[i], x[i + tau], ..., x[i + (dim - 1) * tau])``."""
    x = _series(series)
    if x.size < params.span + 1:
        raise ValueError(f"series of length {x.size} too short for tau={params.tau}, dim={params.dim}")
    windows = np.lib.stride_tricks.sliding_window_view(x, params.span + 1)
    return PointCloud(windows[:, ::params.tau])


# --------------------------------------------------------------------------
# heuristics


def average_mutual_information(series, max_tau: int) -> np.ndarray:
    """AMI in bits for delays ``1..max_tau`` from equal-width histograms.

    The bin count is ``ceil(sqrt(N))`` over the full range of the series.
    """
    x = _series(series)
    n = x.size
    if max_tau < 1:
        raise ValueError("max_tau must be >= 1")
    if max_tau >= n / 4:
        raise ValueError(f"max_tau={max_tau} must be below a quarter of the series length ({n})")
    lo, hi = x.min(), x.max()
    if hi == lo:
        raise ValueError("zero-variance series: mutual information undefined")
    bins = math.ceil(math.sqrt(n))
    labels = np.minimum(((x - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    ami = np.empty(max_tau)
    for tau in range(1, max_tau + 1):
        a, b = labels[:-tau], labels[tau:]
        joint = np.bincount(a * bins + b, minlength=bins * bins).astype(float)
        joint /= joint.sum()
        pa = np.bincount(a, minlength=bins) / a.size
        pb = np.bincount(b, minlength=bins) / b.size
        nz = np.flatnonzero(joint)
        pj = joint[nz]
        ami[tau - 1] = np.sum(pj * np.log2(pj / (pa[nz // bins] * pb[nz % bins])))
    return ami


def select_delay_mi(series, max_tau: int) -> int:
    """First local minimum of the AMI curve; the global minimum if there is none."""
    ami = average_mutual_information(series, max_tau)
    for t in range(1, ami.size - 1):
        if ami[t] < ami[t - 1] and ami[t] <= ami[t + 1]:
            return t + 1
    return int(np.argmin(ami)) + 1


@dataclass(frozen=True)
class FnnResult:
    dim: int
    converged: bool
    fractions: dict = field(default_factory=dict)

    def __int__(self) -> int:
        return self.dim


def false_neighbor_fraction(series, tau: int, dim: int, rtol: float = 10.0, atol: float = 2.0) -> float:
    """Fraction of nearest neighbours in ``dim`` dimensions that separate in ``dim + 1``.

    Kennel's two tests: the added coordinate grows the distance by more than
    ``rtol`` times, or the extended distance exceeds ``atol`` series standard
    deviations. Coincident neighbours that stay coincident are true neighbours.
    """
    x = _series(series)
    cloud = takens_embed(x, EmbeddingParams(tau, dim + 1)).points
    base, extra = cloud[:, :dim], cloud[:, dim]
    tree = cKDTree(base)
    dist, idx = tree.query(base, k=2)
    rows = np.arange(len(base))
    # with duplicate points the query may list another point before self
    self_first = idx[:, 0] == rows
    nb = np.where(self_first, idx[:, 1], idx[:, 0])
    rd = np.where(self_first, dist[:, 1], dist[:, 0])
    delta = np.abs(extra - extra[nb])
    spread = x.std()
    # exactly periodic series revisit points up to rounding; treat those as coincident
    floor = 1e-9 * spread
    false_ratio = (delta > floor) & (delta > rtol * np.maximum(rd, floor))
    false_abs = np.sqrt(rd ** 2 + delta ** 2) > atol * spread
    return float(np.mean(false_ratio | false_abs))


def select_dim_fnn(series, tau: int, max_dim: int, threshold: float = 0.02,
                   rtol: float = 10.0, atol: float = 2.0) -> FnnResult:
    """Smallest ``dim >= 2`` whose false-neighbour fraction is below ``threshold``.

    Returns ``max_dim`` with ``converged=False`` if no dimension qualifies.
    """
    x = _series(series)
    if max_dim < 2:
        raise ValueError("max_dim must be >= 2")
    if x.size < tau * max_dim + 2:
        raise ValueError(f"series of length {x.size} too short for max_dim={max_dim} at tau={tau}")
    if x.std() == 0:
        raise ValueError("zero-variance series")
    fractions = {}
    for d in range(2, max_dim + 1):
        fractions[d] = false_neighbor_fraction(x, tau, d, rtol, atol)
        if fractions[d] < threshold:
            return FnnResult(d, True, fractions)
    return FnnResult(max_dim, False, fractions)


# --------------------------------------------------------------------------
# point-cloud utilities


def maxmin_order(points: np.ndarray, count: int, start: int) -> np.ndarray:
    """Greedy farthest-point ordering from ``start``; ties go to the lowest index."""
    n = len(points)
    chosen = np.empty(count, dtype=np.int64)
    chosen[0] = start
    mind = np.linalg.norm(points - points[start], axis=1)
    for t in range(1, count):
        nxt = int(np.argmax(mind))
        chosen[t] = nxt
        np.minimum(mind, np.linalg.norm(points - points[nxt], axis=1), out=mind)
    return chosen


def subsample(cloud: PointCloud, target_n: int, strategy: str = "maxmin", seed: int = 0) -> PointCloud:
    """Reduce ``cloud`` to ``min(N, target_n)`` of its points.

    ``stride`` keeps points ``floor(i * N / target_n)``; ``maxmin`` runs greedy
    farthest-point sampling from a start point drawn with ``seed``.
    """
    if target_n < 2:
        raise ValueError("target_n must be >= 2")
    n = cloud.n
    if target_n >= n:
        return cloud
    if strategy == "stride":
        idx = (np.arange(target_n) * n) // target_n
    elif strategy == "maxmin":
        start = int(np.random.default_rng(seed).integers(n))
        idx = maxmin_order(cloud.points, target_n, start)
    else:
        raise ValueError(f"unknown subsampling strategy {strategy!r}")
    return PointCloud(cloud.points[idx])


def gyration_radius(cloud) -> float:
    """Root-mean-square distance of the points from their centroid."""
    pts = np.asarray(getattr(cloud, "points", cloud), dtype=np.float64)
    centred = pts - pts.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(centred ** 2, axis=1))))
