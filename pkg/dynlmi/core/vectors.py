import logging
import numpy as np

from collections import namedtuple
from scipy.spatial.distance import cdist
from typing import Optional


log = logging.getLogger(__name__)

Vector = namedtuple("Vector", ["id", "components"])


class DimensionError(ValueError):
    pass


def as_components(v) -> np.ndarray:
    if isinstance(v, Vector):
        v = v.components
    return np.asarray(v)


class Dataset:
    """Fixed-dimension float32 vectors with stable, unique object ids.

    `labels` optionally carries the generating cluster of each vector, which
    synthetic data knows and file data does not.
    """

    def __init__(
        self,
        vectors,
        ids=None,
        labels=None,
        metric: str = "euclidean",
    ):
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise DimensionError(f"expected a 2-D array, got shape {vectors.shape}")
        if metric != "euclidean":
            raise ValueError(f"unsupported metric: {metric}")

        n = vectors.shape[0]
        if ids is None:
            ids = np.arange(n, dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)

        if ids.shape != (n,):
            raise ValueError(f"expected {n} ids, got {ids.shape}")
        if n > 0 and ids.min() < 0:
            raise ValueError("object ids must be nonnegative")
        if len(np.unique(ids)) != n:
            raise KeyError("object ids must be unique within a dataset")

        if n == 0 and vectors.shape[1] == 0:
            self.dimension = None
        else:
            if vectors.shape[1] == 0:
                raise DimensionError("dimension must be positive")
            self.dimension = vectors.shape[1]

        self.vectors = vectors
        self.ids = ids
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        self.metric = metric

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __iter__(self):
        for id, components in zip(self.ids, self.vectors):
            yield Vector(int(id), components)

    def __getitem__(self, key) -> "Dataset":
        return Dataset(
            self.vectors[key],
            ids=self.ids[key],
            labels=None if self.labels is None else self.labels[key],
            metric=self.metric,
        )

    def concat(self, other: "Dataset") -> "Dataset":
        if len(self) == 0:
            return other
        if len(other) == 0:
            return self
        if self.dimension != other.dimension:
            raise DimensionError(f"{self.dimension} != {other.dimension}")

        labels = None
        if self.labels is not None and other.labels is not None:
            labels = np.concatenate([self.labels, other.labels])

        return Dataset(
            np.concatenate([self.vectors, other.vectors]),
            ids=np.concatenate([self.ids, other.ids]),
            labels=labels,
        )


def squared_distances(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances from `query` to every row, accumulated in float64.

    Every distance in the package goes through here so that brute force and
    index search rank candidates identically.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    return cdist(np.asarray(query, dtype=np.float64)[None, :], rows, "sqeuclidean")[0]


def euclidean_distance(a, b) -> float:
    a = as_components(a)
    b = as_components(b)

    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")

    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(np.dot(diff, diff)))


def rank(ids: np.ndarray, sq_dists: np.ndarray, k: int) -> list[tuple[int, float]]:
    """The k best (id, distance) pairs, ascending by distance then id."""
    order = np.lexsort((ids, sq_dists))[:k]
    return [(int(ids[i]), float(np.sqrt(sq_dists[i]))) for i in order]


def knn_bruteforce(dataset: Dataset, query, k: int) -> list[tuple[int, float]]:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k > len(dataset):
        raise ValueError(f"k={k} exceeds dataset size {len(dataset)}")

    query = as_components(query)
    if query.shape != (dataset.dimension,):
        raise DimensionError(
            f"query has shape {query.shape}, dataset dimension is {dataset.dimension}"
        )

    return rank(dataset.ids, squared_distances(dataset.vectors, query), k)


def recall(returned, truth, k: int) -> float:
    truth = [int(t) for t in truth]
    if len(truth) != k:
        raise ValueError(f"expected {k} true neighbors, got {len(truth)}")

    returned = {int(r) for r in returned}
    return len(returned.intersection(truth)) / k


class GroundTruth:
    def __init__(self, neighbors):
        neighbors = np.asarray(neighbors, dtype=np.int64)
        if neighbors.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {neighbors.shape}")

        self.neighbors = neighbors
        self.k = neighbors.shape[1]

    def __len__(self) -> int:
        return self.neighbors.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.neighbors[i]


def ground_truth(dataset: Dataset, queries: Dataset, k: int) -> GroundTruth:
    neighbors = np.empty((len(queries), k), dtype=np.int64)
    for i, q in enumerate(queries.vectors):
        neighbors[i] = [id for id, _ in knn_bruteforce(dataset, q, k)]

    return GroundTruth(neighbors)


def synthetic_dataset(
    n: int,
    dim: int,
    n_clusters: int,
    seed: int,
    cluster_std: float = 1.0,
    spread: float = 10.0,
    first_id: int = 0,
) -> Dataset:
    """Gaussian blobs around `n_clusters` distinct means drawn from [-spread, spread]^dim."""
    if n <= 0 or dim <= 0 or n_clusters <= 0:
        raise ValueError(
            f"n, dim and n_clusters must be positive, got {n}, {dim}, {n_clusters}"
        )

    rng = np.random.default_rng(seed)

    means = rng.uniform(-spread, spread, size=(n_clusters, dim))
    labels = rng.integers(0, n_clusters, size=n)
    noise = rng.normal(0.0, cluster_std, size=(n, dim))

    vectors = (means[labels] + noise).astype(np.float32)
    ids = np.arange(first_id, first_id + n, dtype=np.int64)

    log.debug("generated %d vectors of dimension %d in %d clusters", n, dim, n_clusters)

    return Dataset(vectors, ids=ids, labels=labels)


def split_queries(dataset: Dataset, n_queries: int, seed: int) -> tuple[Dataset, Dataset]:
    if not 0 < n_queries < len(dataset):
        raise ValueError(f"cannot hold out {n_queries} of {len(dataset)} vectors")

    rng = np.random.default_rng(seed)
    mask = np.zeros(len(dataset), dtype=bool)
    mask[rng.choice(len(dataset), size=n_queries, replace=False)] = True

    return dataset[~mask], dataset[mask]
