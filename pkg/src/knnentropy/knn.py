"""Exact k-nearest-neighbor distances on Euclidean and flat-torus spaces.

Two backends answer the same queries:

* ``brute``: every distance is computed and rows are ordered by
  (distance, index).
* ``kdtree``: ``scipy.spatial.cKDTree`` (periodic box for the torus) proposes a
  few extra candidates per query; their distances are recomputed with
  :func:`knnentropy.spaces.distances_to` and ordered the same way. A query
  whose candidate set cannot be certified (a tie or near-tie at the cut) falls
  back to brute force, so both backends agree bitwise.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from knnentropy.spaces import DimensionMismatch, MetricSpaceSpec, distances_to, normalize

# relative gap required between the k-th candidate and the first excluded one
_CERTIFY_RTOL = 1e-9
_EXTRA_CANDIDATES = 2
# bound on the number of coordinate differences held in memory per brute-force block
_BRUTE_BLOCK = 1 << 22


class KnnError(ValueError):
    pass


class ZeroDistanceError(KnnError):
    """A k-NN distance is zero (duplicate points), so log(eps) is undefined."""


@dataclass(frozen=True, eq=False)
class Dataset:
    space: MetricSpaceSpec
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        raw = np.asarray(self.points, dtype=np.float64)
        if self.space.D == 1 and raw.ndim == 1:
            raw = raw[:, None]
        pts = normalize(self.space, raw)
        if pts.ndim != 2:
            raise DimensionMismatch(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise KnnError("a dataset needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def D(self):
        return self.space.D

    def __len__(self):
        return self.n


@dataclass(frozen=True, eq=False)
class KnnResult:
    k: int
    eps: np.ndarray
    neighbor_indices: np.ndarray

    @property
    def n_zero(self):
        return int(np.count_nonzero(self.eps == 0.0))


def _ordered_rows(dist, idx, k):
    """Sort each row by (dist, idx) and keep the first k columns."""
    order = np.lexsort((idx, dist), axis=-1)
    dist = np.take_along_axis(dist, order, axis=-1)[:, :k]
    idx = np.take_along_axis(idx, order, axis=-1)[:, :k]
    return dist, idx


class KnnIndex:
    """Immutable exact k-NN index over a :class:`Dataset`."""

    def __init__(self, data, method="auto"):
        if not isinstance(data, Dataset):
            raise TypeError("build_index expects a Dataset")
        if method not in ("auto", "kdtree", "brute"):
            raise ValueError(f"unknown method {method!r}")
        self.data = data
        self.space = data.space
        if method == "auto":
            method = "kdtree" if data.n > 64 else "brute"
        self.method = method
        self._tree = None
        if method == "kdtree":
            boxsize = 1.0 if self.space.is_torus else None
            self._tree = cKDTree(data.points, boxsize=boxsize)

    @property
    def n(self):
        return self.data.n

    def _check_k(self, k, excluding):
        limit = self.n - 1 if excluding else self.n
        if int(k) != k or k < 1 or k > limit:
            raise KnnError(f"k={k} out of range [1, {limit}]")

    def _brute(self, queries, k, exclude):
        pts = self.data.points
        out_d = np.empty((len(queries), k))
        out_i = np.empty((len(queries), k), dtype=np.intp)
        all_idx = np.arange(self.n, dtype=np.intp)
        chunk = max(1, _BRUTE_BLOCK // (self.n * self.space.D))
        for start in range(0, len(queries), chunk):
            q = queries[start:start + chunk]
            dist = distances_to(self.space, pts[None, :, :], q[:, None, :])
            idx = np.broadcast_to(all_idx, dist.shape)
            if exclude is not None:
                ex = exclude[start:start + chunk]
                dist = np.where(idx == ex[:, None], np.inf, dist)
            d, i = _ordered_rows(dist, idx, k)
            out_d[start:start + len(q)] = d
            out_i[start:start + len(q)] = i
        return out_d, out_i

    def _kdtree(self, queries, k, exclude):
        n_extra = 1 if exclude is not None else 0
        kq = min(self.n, k + n_extra + _EXTRA_CANDIDATES)
        tree_d, idx = self._tree.query(queries, k=kq)
        tree_d = tree_d.reshape(len(queries), kq)
        idx = idx.reshape(len(queries), kq).astype(np.intp)
        cand = self.data.points[idx]
        dist = distances_to(self.space, cand, queries[:, None, :])
        if exclude is not None:
            dist = np.where(idx == exclude[:, None], np.inf, dist)
        d, i = _ordered_rows(dist, idx, k)
        if kq < self.n:
            # any point outside the candidate set is at least tree_d[:, -1] away
            kth = d[:, -1]
            unsafe = ~(tree_d[:, -1] > kth * (1.0 + _CERTIFY_RTOL) + 1e-300)
            if np.any(unsafe):
                rows = np.flatnonzero(unsafe)
                ex = exclude[rows] if exclude is not None else None
                d[rows], i[rows] = self._brute(queries[rows], k, ex)
        return d, i

    def query(self, x, k, exclude=None):
        """k nearest neighbors of each query row, ordered by (distance, index).

        ``exclude`` is an optional per-query dataset index to leave out.
        Returns ``(distances, indices)`` with shape (m, k).
        """
        queries = normalize(self.space, x)
        if queries.ndim == 1:
            queries = queries[None, :]
        if exclude is not None:
            exclude = np.broadcast_to(np.asarray(exclude, dtype=np.intp), (len(queries),))
        self._check_k(k, exclude is not None)
        if self.method == "brute":
            return self._brute(queries, k, exclude)
        return self._kdtree(queries, k, exclude)

    def knn_distance(self, x, k, exclude=None):
        """eps_k(x): distance from a single point to its k-th nearest neighbor."""
        point = np.reshape(np.asarray(x, dtype=np.float64), -1)
        if point.shape != (self.space.D,):
            raise DimensionMismatch(f"query has {point.size} coordinates, space has D={self.space.D}")
        d, _ = self.query(point[None, :], k, exclude=exclude)
        return float(d[0, -1])

    def loo_knn_distances(self, k, strict=True):
        """Leave-one-out k-NN distance of every dataset point."""
        self._check_k(k, excluding=True)
        own = np.arange(self.n, dtype=np.intp)
        d, i = self.query(self.data.points, k, exclude=own)
        result = KnnResult(k=int(k), eps=d[:, -1].copy(), neighbor_indices=i)
        if strict and result.n_zero:
            raise ZeroDistanceError(
                f"{result.n_zero} point(s) have a zero {k}-NN distance (duplicate samples)")
        return result


def build_index(data, method="auto"):
    return KnnIndex(data, method=method)


def knn_distance(index, x, k, exclude=None):
    return index.knn_distance(x, k, exclude=exclude)


def loo_knn_distances(index, k, strict=True):
    return index.loo_knn_distances(k, strict=strict)


def batch_knn_distances(space, samples, x, k):
    """eps_k(x) for a fixed query x against each of many independent samples.

    ``samples`` has shape (trials, n, D); returns shape (trials,). Uses the
    canonical distance path, so values match :meth:`KnnIndex.knn_distance`.
    """
    samples = np.asarray(samples, dtype=np.float64)
    x = np.reshape(np.asarray(x, dtype=np.float64), (space.D,))
    if k < 1 or k > samples.shape[1]:
        raise KnnError(f"k={k} out of range [1, {samples.shape[1]}]")
    dist = distances_to(space, samples, x)
    return np.partition(dist, k - 1, axis=-1)[:, k - 1]
