import logging
import numpy as np

from collections import namedtuple
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus


log = logging.getLogger(__name__)

MAX_ITER = 50

KMeansResult = namedtuple(
    "KMeansResult",
    field_names=["labels", "centroids", "n_iter", "inertia", "distance_computations"],
)
KMeansResult.__doc__ = """Labels in [0, k), k centroids, and how much work it took.

`inertia` holds the objective (sum of squared distances to the assigned
centroid) after every Lloyd iteration.
"""


def _repair_empty(X, labels, sq_dists, centroids, k):
    """Reseed each empty cluster to the point farthest from its own centroid."""
    counts = np.bincount(labels, minlength=k)

    for j in np.flatnonzero(counts == 0):
        own = sq_dists[np.arange(len(labels)), labels].copy()
        # only take points from clusters that can spare one
        own[counts[labels] <= 1] = -1.0
        p = int(np.argmax(own))

        counts[labels[p]] -= 1
        counts[j] += 1
        labels[p] = j
        centroids[j] = X[p]
        sq_dists[p, j] = 0.0

    return labels, centroids


def kmeans(objects, k: int, seed: int, max_iter: int = MAX_ITER) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when no label changes or after `max_iter` iterations.
    """
    X = np.asarray(objects, dtype=np.float64)
    n = X.shape[0]

    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds object count {n}")

    centroids, _ = kmeans_plusplus(X, n_clusters=k, random_state=seed)
    distance_computations = n * k

    labels = None
    inertia = []
    n_iter = 0

    while n_iter < max_iter:
        sq_dists = cdist(X, centroids, "sqeuclidean")
        distance_computations += n * k

        new_labels = np.argmin(sq_dists, axis=1)
        new_labels, centroids = _repair_empty(X, new_labels, sq_dists, centroids, k)

        inertia.append(float(sq_dists[np.arange(n), new_labels].sum()))

        if labels is not None and np.array_equal(labels, new_labels):
            break

        labels = new_labels
        n_iter += 1

        for j in range(k):
            centroids[j] = X[labels == j].mean(axis=0)

    log.debug("k-means on %d objects, k=%d converged after %d iterations", n, k, n_iter)

    return KMeansResult(
        labels=labels,
        centroids=centroids,
        n_iter=n_iter,
        inertia=inertia,
        distance_computations=distance_computations,
    )
