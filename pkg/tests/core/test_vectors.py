import pytest
import numpy as np

from dynlmi.core import vectors
from dynlmi.core.vectors import Dataset, DimensionError, Vector


def grid():
    # four points on a line, ids deliberately out of order
    return Dataset(
        [[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [-1.0, 0.0]],
        ids=[10, 4, 7, 2],
    )


def test_dataset():
    ds = grid()

    assert len(ds) == 4
    assert ds.dimension == 2
    assert ds.vectors.dtype == np.float32
    assert list(ds.ids) == [10, 4, 7, 2]

    first = next(iter(ds))
    assert isinstance(first, Vector)
    assert first.id == 10

    sub = ds[1:3]
    assert list(sub.ids) == [4, 7]
    assert sub.dimension == 2


def test_dataset_default_ids():
    ds = Dataset(np.zeros((3, 5)))
    assert list(ds.ids) == [0, 1, 2]


def test_dataset_errors():
    with pytest.raises(KeyError):
        Dataset(np.zeros((2, 3)), ids=[1, 1])

    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 3)), ids=[-1, 0])

    with pytest.raises(DimensionError):
        Dataset(np.zeros(3))

    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 3)), metric="cosine")


def test_empty_dataset():
    ds = Dataset(np.empty((0, 0)))
    assert len(ds) == 0
    assert ds.dimension is None


def test_concat():
    a = grid()
    b = Dataset([[5.0, 5.0]], ids=[99])

    both = a.concat(b)
    assert len(both) == 5
    assert both.ids[-1] == 99

    with pytest.raises(KeyError):
        a.concat(Dataset([[5.0, 5.0]], ids=[10]))

    with pytest.raises(DimensionError):
        a.concat(Dataset([[5.0, 5.0, 5.0]], ids=[99]))


def test_euclidean_distance():
    assert vectors.euclidean_distance([0, 0], [3, 4]) == pytest.approx(5.0)
    assert vectors.euclidean_distance(Vector(1, np.array([1.0, 1.0])), [1, 1]) == 0.0

    with pytest.raises(DimensionError):
        vectors.euclidean_distance([0, 0], [0, 0, 0])


def test_knn_bruteforce():
    ds = grid()

    result = vectors.knn_bruteforce(ds, [0.1, 0.0], 3)
    assert [id for id, _ in result] == [10, 4, 2]
    assert result[0][1] == pytest.approx(0.1, abs=1e-6)


def test_knn_bruteforce_ties_break_by_id():
    ds = Dataset([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]], ids=[8, 3, 5])

    result = vectors.knn_bruteforce(ds, [0.0, 0.0], 3)
    assert [id for id, _ in result] == [3, 5, 8]


def test_knn_bruteforce_errors():
    ds = grid()

    with pytest.raises(ValueError):
        vectors.knn_bruteforce(ds, [0.0, 0.0], 0)

    with pytest.raises(ValueError):
        vectors.knn_bruteforce(ds, [0.0, 0.0], 5)

    with pytest.raises(DimensionError):
        vectors.knn_bruteforce(ds, [0.0, 0.0, 0.0], 1)


def test_recall():
    assert vectors.recall([1, 2, 3], [3, 2, 1], 3) == 1.0
    assert vectors.recall([1, 9], [1, 2], 2) == 0.5
    assert vectors.recall([], [1, 2], 2) == 0.0

    with pytest.raises(ValueError):
        vectors.recall([1], [1, 2], 3)


def test_ground_truth():
    ds = grid()
    queries = Dataset([[0.0, 0.0], [3.0, 0.0]])

    truth = vectors.ground_truth(ds, queries, 2)
    assert truth.k == 2
    assert len(truth) == 2
    assert list(truth[0]) == [10, 2]
    assert list(truth[1]) == [7, 4]


def test_synthetic_dataset():
    a = vectors.synthetic_dataset(200, 4, 3, seed=1)
    b = vectors.synthetic_dataset(200, 4, 3, seed=1)
    c = vectors.synthetic_dataset(200, 4, 3, seed=2)

    assert len(a) == 200
    assert a.dimension == 4
    assert np.array_equal(a.vectors, b.vectors)
    assert not np.array_equal(a.vectors, c.vectors)
    assert set(a.labels) <= {0, 1, 2}

    shifted = vectors.synthetic_dataset(10, 4, 3, seed=1, first_id=100)
    assert list(shifted.ids) == list(range(100, 110))

    with pytest.raises(ValueError):
        vectors.synthetic_dataset(0, 4, 3, seed=1)


def test_split_queries():
    ds = vectors.synthetic_dataset(100, 3, 2, seed=0)

    base, queries = vectors.split_queries(ds, 10, seed=0)
    assert len(base) == 90
    assert len(queries) == 10
    assert not set(base.ids) & set(queries.ids)

    with pytest.raises(ValueError):
        vectors.split_queries(ds, 100, seed=0)
