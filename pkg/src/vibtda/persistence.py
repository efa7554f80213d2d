"""Vietoris-Rips persistent homology over Z/2 in dimensions 0-2.

Filtration values follow the diameter convention: a simplex enters at the
largest pairwise distance among its vertices. Simplices are totally ordered by
``(filtration, dimension, vertex tuple)``.

Dimension 0 is computed with union-find over the sorted edge list. Higher
dimensions are computed by reducing the coboundary matrix (which yields the
same persistence pairs as the boundary matrix for the same total order) with
coboundary columns generated on demand and the clearing optimization: a
k-simplex already used as a pivot in dimension k-1 is never reduced.

:func:`brute_force_persistence` is an independent textbook implementation used
as a test oracle.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import _kernels

DEFAULT_SIMPLEX_BUDGET = 5_000_000
BRUTE_FORCE_MAX_POINTS = 10


class SimplexBudgetError(RuntimeError):
    """Raised when the Rips complex would exceed the configured simplex budget."""


@dataclass(frozen=True, order=True)
class PersistencePair:
    dim: int
    birth: float
    death: float

    def __post_init__(self):
        if not self.death > self.birth:
            raise ValueError(f"death {self.death} must exceed birth {self.birth}")

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def essential(self) -> bool:
        return math.isinf(self.death)


@dataclass(frozen=True)
class PersistenceDiagram:
    """Birth/death pairs for dimensions ``0..max_dim`` of a (possibly capped) filtration."""

    pairs: tuple[PersistencePair, ...]
    max_dim: int
    max_filtration: float
    _by_dim: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = tuple(sorted(self.pairs))
        object.__setattr__(self, "pairs", pairs)
        for p in pairs:
            if p.dim > self.max_dim:
                raise ValueError(f"pair of dimension {p.dim} exceeds max_dim {self.max_dim}")
        by_dim = {k: np.array([(p.birth, p.death) for p in pairs if p.dim == k], dtype=float).reshape(-1, 2)
                  for k in range(self.max_dim + 1)}
        object.__setattr__(self, "_by_dim", by_dim)

    def dimension(self, k: int) -> np.ndarray:
        """``(n, 2)`` array of (birth, death) pairs in dimension ``k``; deaths may be ``inf``."""
        if k in self._by_dim:
            return self._by_dim[k].copy()
        return np.empty((0, 2))

    def d_max(self, k: int) -> float:
        """Largest finite death in dimension ``k`` (0 if there is none)."""
        deaths = self.dimension(k)[:, 1]
        finite = deaths[np.isfinite(deaths)]
        return float(finite.max()) if finite.size else 0.0

    def finite_intervals(self, k: int, essential: str = "cap") -> np.ndarray:
        """Pairs of dimension ``k`` with essential deaths replaced per ``essential``.

        ``"cap"`` substitutes ``max_filtration`` for infinite deaths, ``"drop"``
        removes essential pairs. Pairs left with zero length are removed.
        """
        arr = self.dimension(k)
        inf = ~np.isfinite(arr[:, 1])
        if essential == "cap":
            arr[inf, 1] = self.max_filtration
        elif essential == "drop":
            arr = arr[~inf]
        else:
            raise ValueError(f"unknown essential policy {essential!r}")
        return arr[arr[:, 1] > arr[:, 0]]

    def betti(self, k: int, eps: float) -> int:
        arr = self.dimension(k)
        return int(np.count_nonzero((arr[:, 0] <= eps) & (eps < arr[:, 1])))

    def scaled(self, c: float) -> "PersistenceDiagram":
        return PersistenceDiagram(
            tuple(PersistencePair(p.dim, p.birth * c, p.death * c) for p in self.pairs),
            self.max_dim,
            self.max_filtration * c,
        )

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dim", "birth", "death"])
            for p in self.pairs:
                writer.writerow([p.dim, repr(p.birth), "inf" if p.essential else repr(p.death)])

    @classmethod
    def read_csv(cls, path: str | Path, max_dim: int | None = None,
                 max_filtration: float | None = None) -> "PersistenceDiagram":
        pairs = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                pairs.append(PersistencePair(int(row["dim"]), float(row["birth"]), float(row["death"])))
        if max_dim is None:
            max_dim = max((p.dim for p in pairs), default=0)
        if max_filtration is None:
            max_filtration = max((v for p in pairs for v in (p.birth, p.death) if math.isfinite(v)), default=0.0)
        return cls(tuple(pairs), max_dim, max_filtration)


@dataclass(frozen=True)
class BettiCurve:
    grid: np.ndarray
    counts: np.ndarray
    dim: int


def distance_matrix(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix shared by the fast path and the oracle."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("points must be a non-empty (N, d) array")
    if len(x) == 1:
        return np.zeros((1, 1))
    return squareform(pdist(x))


def _points_of(cloud) -> np.ndarray:
    return np.asarray(getattr(cloud, "points", cloud), dtype=float)


def _resolve_cap(dist: np.ndarray, max_filtration) -> float:
    if max_filtration is None or max_filtration == "auto":
        return float(dist.max())
    cap = float(max_filtration)
    if cap < 0:
        raise ValueError("max_filtration must be non-negative")
    return cap


# --------------------------------------------------------------------------
# fast path


def _budget_error(budget: int) -> SimplexBudgetError:
    return SimplexBudgetError(
        f"Rips complex exceeds the simplex budget of {budget}; subsample the cloud "
        f"or lower max_filtration")


def rips_persistence(cloud, max_dim: int = 1, max_filtration=None,
                     simplex_budget: int = DEFAULT_SIMPLEX_BUDGET) -> PersistenceDiagram:
    """Persistence diagram of the Vietoris-Rips filtration of a point cloud.

    Args:
        cloud: a :class:`~vibtda.embedding.PointCloud` or an ``(N, d)`` array.
        max_dim: highest homology dimension to compute (0, 1 or 2).
        max_filtration: filtration cap; ``None``/``"auto"`` uses the largest
            pairwise distance.
        simplex_budget: maximum number of simplices of dimension ``<= max_dim``
            that may be materialized. Simplices of dimension ``max_dim + 1``
            only ever appear as implicit coboundary entries.

    Raises:
        SimplexBudgetError: if the complex is larger than ``simplex_budget``.
    """
    if max_dim not in (0, 1, 2):
        raise ValueError("max_dim must be 0, 1 or 2")
    dist = distance_matrix(_points_of(cloud))
    cap = _resolve_cap(dist, max_filtration)
    n = len(dist)
    if n ** (max_dim + 2) >= 2 ** 62:
        raise SimplexBudgetError("too many points for simplex encoding; subsample the cloud")

    iu, ju = np.triu_indices(n, k=1)
    ed = dist[iu, ju]
    inside = ed <= cap
    iu, ju, ed = iu[inside].astype(np.int64), ju[inside].astype(np.int64), ed[inside]
    used = n + ed.size
    if used > simplex_budget:
        raise _budget_error(simplex_budget)
    order = np.lexsort((ju, iu, ed))
    iu, ju, ed = iu[order], ju[order], ed[order]

    merging = _kernels.union_find_h0(n, iu, ju)
    pairs = [PersistencePair(0, 0.0, float(d)) for d in ed[merging] if d > 0]
    n_components = n - int(merging.sum())
    pairs.extend(PersistencePair(0, 0.0, math.inf) for _ in range(n_components))

    if max_dim >= 1:
        # merging edges are pivots of the dimension-0 reduction: cleared
        cols = np.stack([iu[~merging], ju[~merging]], axis=1)
        new_pairs, cleared = _reduce(cols, ed[~merging], dist, cap, 1)
        pairs.extend(new_pairs)
        if max_dim == 2:
            total = _kernels.count_triangles(iu, ju, ed, dist, cap)
            if used + total > simplex_budget:
                raise _budget_error(simplex_budget)
            tverts, tdiams, tcodes = _kernels.enumerate_triangles(iu, ju, ed, dist, cap, total)
            keep = ~np.isin(tcodes, cleared)
            tverts, tdiams, tcodes = tverts[keep], tdiams[keep], tcodes[keep]
            order = np.lexsort((tcodes, tdiams))
            pairs.extend(_reduce(tverts[order], tdiams[order], dist, cap, 2)[0])
    return PersistenceDiagram(tuple(pairs), max_dim, cap)


def _reduce(cols: np.ndarray, diams: np.ndarray, dist: np.ndarray, cap: float, k: int):
    deaths, pivots = _kernels.reduce_coboundary(cols, diams, dist, cap)
    pairs = [PersistencePair(k, float(b), float(d)) for b, d in zip(diams, deaths) if d > b]
    return pairs, pivots[pivots >= 0]


# --------------------------------------------------------------------------
# oracle


def brute_force_persistence(cloud, max_dim: int = 1, max_filtration=None) -> PersistenceDiagram:
    """Textbook persistence: full boundary matrix, left-to-right column reduction.

    Only for clouds with at most 10 points; shares nothing with
    :func:`rips_persistence` beyond :func:`distance_matrix`.
    """
    dist = distance_matrix(_points_of(cloud))
    n = len(dist)
    if n > BRUTE_FORCE_MAX_POINTS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_POINTS} points, got {n}")
    cap = _resolve_cap(dist, max_filtration)

    simplices = []
    for size in range(1, max_dim + 3):
        for verts in itertools.combinations(range(n), size):
            f = max((dist[a, b] for a, b in itertools.combinations(verts, 2)), default=0.0)
            if f <= cap:
                simplices.append((f, size - 1, verts))
    simplices.sort()
    index = {s[2]: i for i, s in enumerate(simplices)}

    columns = []
    for f, dim, verts in simplices:
        if dim == 0:
            columns.append(set())
        else:
            columns.append({index[verts[:t] + verts[t + 1:]] for t in range(len(verts))})

    low_owner: dict[int, int] = {}
    lows = [None] * len(columns)
    for j in range(len(columns)):
        col = columns[j]
        while col and max(col) in low_owner:
            col ^= columns[low_owner[max(col)]]
        if col:
            lows[j] = max(col)
            low_owner[max(col)] = j

    pairs = []
    for i, (f, dim, verts) in enumerate(simplices):
        if dim > max_dim or lows[i] is not None:
            continue  # simplices beyond max_dim, or negative simplices
        if i in low_owner:
            death = simplices[low_owner[i]][0]
            if death > f:
                pairs.append(PersistencePair(dim, float(f), float(death)))
        else:
            pairs.append(PersistencePair(dim, float(f), math.inf))
    return PersistenceDiagram(tuple(pairs), max_dim, cap)


# --------------------------------------------------------------------------
# Betti curves


def betti_curve(diagram: PersistenceDiagram, dim: int, grid_size: int = 100) -> BettiCurve:
    """Betti numbers on a uniform grid over ``[0, max_filtration]``.

    A pair counts at ``eps`` when ``birth <= eps < death``; essential pairs
    count for every ``eps >= birth``.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    grid = np.linspace(0.0, diagram.max_filtration, grid_size)
    arr = diagram.dimension(dim)
    counts = ((arr[:, 0][None, :] <= grid[:, None]) & (grid[:, None] < arr[:, 1][None, :])).sum(axis=1)
    return BettiCurve(grid, counts.astype(np.int64), dim)

