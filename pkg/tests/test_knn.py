import numpy as np
import pytest

from knnentropy.knn import (Dataset, KnnError, ZeroDistanceError, batch_knn_distances,
                            build_index, knn_distance, loo_knn_distances)
from knnentropy.spaces import distance, euclidean, flat_torus


def brute_force_oracle(data, x, k, exclude=None):
    """Independent k-NN: full sort of per-pair distances by (distance, index)."""
    keyed = sorted((distance(data.space, p, x), j) for j, p in enumerate(data.points) if j != exclude)
    return [d for d, _ in keyed[:k]], [j for _, j in keyed[:k]]


class TestDataset:
    def test_empty_rejected(self):
        with pytest.raises(KnnError):
            Dataset(euclidean(2), np.empty((0, 2)))

    def test_single_point_index(self):
        index = build_index(Dataset(euclidean(1), [0.5]))
        assert knn_distance(index, [0.0], 1) == 0.5

    def test_torus_points_wrapped(self):
        data = Dataset(flat_torus(1), [1.25, -0.25])
        assert data.points.ravel().tolist() == [0.25, 0.75]

    def test_immutable(self):
        data = Dataset(euclidean(1), [1.0, 2.0])
        with pytest.raises(ValueError):
            data.points[0, 0] = 5.0


class TestKnnDistance:
    def test_line_examples(self):
        index = build_index(Dataset(euclidean(1), [1.0, 3.0]))
        assert knn_distance(index, [0.0], 1) == 1.0
        assert knn_distance(index, [0.0], 2) == 3.0

    def test_torus_wraparound(self):
        index = build_index(Dataset(flat_torus(1), [0.1, 0.9]))
        assert knn_distance(index, [0.0], 1) == pytest.approx(0.1)

    def test_k_out_of_range(self):
        index = build_index(Dataset(euclidean(1), [1.0, 3.0]))
        with pytest.raises(KnnError):
            knn_distance(index, [0.0], 3)
        with pytest.raises(KnnError):
            knn_distance(index, [0.0], 2, exclude=0)
        with pytest.raises(KnnError):
            knn_distance(index, [0.0], 0)

    def test_ties_by_index(self):
        index = build_index(Dataset(euclidean(1), [2.0, -1.0, 1.0, -2.0]), method="brute")
        _, idx = index.query([[0.0]], 4)
        assert idx[0].tolist() == [1, 2, 0, 3]


class TestLeaveOneOut:
    def test_examples(self):
        index = build_index(Dataset(euclidean(1), [0.0, 1.0, 3.0]))
        assert loo_knn_distances(index, 1).eps.tolist() == [1.0, 1.0, 2.0]
        assert loo_knn_distances(index, 2).eps.tolist() == [3.0, 2.0, 3.0]

    def test_k_must_be_below_n(self):
        index = build_index(Dataset(euclidean(1), [0.0, 1.0, 3.0]))
        with pytest.raises(KnnError):
            loo_knn_distances(index, 3)

    def test_duplicates_strict_and_lenient(self):
        index = build_index(Dataset(euclidean(1), [0.0, 1.0, 1.0, 4.0]))
        with pytest.raises(ZeroDistanceError):
            loo_knn_distances(index, 1)
        res = loo_knn_distances(index, 1, strict=False)
        assert res.n_zero == 2

    def test_permutation_covariance(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(300, 3))
        perm = rng.permutation(300)
        a = build_index(Dataset(euclidean(3), pts)).loo_knn_distances(3).eps
        b = build_index(Dataset(euclidean(3), pts[perm])).loo_knn_distances(3).eps
        assert np.array_equal(a[perm], b)

    def test_monotone_in_k(self):
        rng = np.random.default_rng(4)
        index = build_index(Dataset(flat_torus(2), rng.random((200, 2))))
        prev = np.zeros(200)
        for k in range(1, 8):
            eps = index.loo_knn_distances(k).eps
            assert np.all(eps >= prev)
            prev = eps


@pytest.mark.parametrize("kind", ["euclidean", "flat_torus"])
def test_oracle_equivalence(kind):
    rng = np.random.default_rng(17 if kind == "euclidean" else 18)
    for trial in range(150):
        D = int(rng.integers(1, 6))
        n = int(rng.integers(2, 120))
        space = euclidean(D) if kind == "euclidean" else flat_torus(D)
        pts = rng.normal(size=(n, D)) if kind == "euclidean" else rng.random((n, D))
        if trial % 5 == 0:
            pts = np.round(pts * 4) / 4          # force ties
        data = Dataset(space, pts)
        x = data.points[rng.integers(n)] if trial % 3 == 0 else rng.random(D)
        exclude = int(rng.integers(n)) if trial % 2 else None
        k = int(rng.integers(1, n - (exclude is not None) + 1))
        want_d, want_i = brute_force_oracle(data, x, k, exclude)
        for method in ("kdtree", "brute"):
            d, i = build_index(data, method).query(x[None, :], k, exclude=exclude)
            assert d[0].tolist() == want_d
            assert i[0].tolist() == want_i


def test_large_gaussian_kdtree_matches_brute():
    rng = np.random.default_rng(0)
    data = Dataset(euclidean(5), rng.normal(size=(10_000, 5)))
    queries = rng.normal(size=(300, 5))
    a = build_index(data, "kdtree").query(queries, 4)
    b = build_index(data, "brute").query(queries, 4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_batch_matches_index():
    rng = np.random.default_rng(8)
    samples = rng.random((20, 50, 2))
    x = np.array([0.3, 0.9])
    batch = batch_knn_distances(flat_torus(2), samples, x, 3)
    for s, val in zip(samples, batch):
        assert build_index(Dataset(flat_torus(2), s)).knn_distance(x, 3) == val
