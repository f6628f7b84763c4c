import heapq
import logging
import math
import numpy as np
import pandas as pd
import time

from collections import namedtuple
from typing import Iterator, Optional

from dynlmi.core.vectors import (
    Dataset,
    DimensionError,
    Vector,
    as_components,
    rank,
    squared_distances,
)
from dynlmi.model.classifier import ClassifierModel, Hyperparams, train_classifier
from dynlmi.model.kmeans import kmeans


log = logging.getLogger(__name__)


class Cost(namedtuple("Cost", ["seconds", "distance_computations"], defaults=[0.0, 0])):
    """Wall-clock seconds plus the hardware-independent distance-computation proxy."""

    def __add__(self, other):
        return Cost(
            self.seconds + other.seconds,
            self.distance_computations + other.distance_computations,
        )


IndexSettings = namedtuple(
    "IndexSettings",
    field_names=["kind", "hyperparams", "seed", "max_depth"],
    defaults=["centroid", Hyperparams(), 0, 2],
)

SearchResult = namedtuple(
    "SearchResult",
    field_names=["neighbors", "buckets_visited", "objects_scanned", "short"],
)

Violation = namedtuple("Violation", ["code", "pos", "message"])

IndexStats = namedtuple(
    "IndexStats",
    field_names=[
        "leaf_count",
        "inner_count",
        "object_count",
        "depth",
        "inner_depth",
        "occupancy",
        "avg_occupancy",
        "children_min",
        "children_max",
        "children_mean",
    ],
)


def format_pos(pos: tuple) -> str:
    return ".".join(["r"] + [str(i) for i in pos])


def parse_pos(text: str) -> tuple:
    parts = text.split(".")
    if parts[0] != "r":
        raise ValueError(f"node position must start with 'r': {text}")
    return tuple(int(p) for p in parts[1:])


class LeafNode:
    is_leaf = True

    def __init__(self, pos: tuple, objects: Optional[list[int]] = None):
        self.pos = pos
        self.objects = list(objects) if objects is not None else []

    def __repr__(self):
        return f"LeafNode({format_pos(self.pos)}, {len(self.objects)} objects)"


class InnerNode:
    is_leaf = False

    def __init__(self, pos: tuple, model: ClassifierModel, children: list):
        self.pos = pos
        self.model = model
        self.children = children

    def __repr__(self):
        return f"InnerNode({format_pos(self.pos)}, {len(self.children)} children)"


class VectorStore:
    """Every indexed vector, stored once and keyed by object id.

    Rows keep insertion order; leaves reference objects by id only.
    """

    def __init__(self, dimension: int, capacity: int = 1024):
        self.dimension = dimension
        self._vectors = np.empty((capacity, dimension), dtype=np.float32)
        self._ids = np.empty(capacity, dtype=np.int64)
        self._rows = {}

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, id) -> bool:
        return int(id) in self._rows

    def _reserve(self, extra: int):
        needed = len(self) + extra
        if needed <= self._vectors.shape[0]:
            return

        capacity = max(needed, 2 * self._vectors.shape[0])
        vectors = np.empty((capacity, self.dimension), dtype=np.float32)
        vectors[: len(self)] = self._vectors[: len(self)]
        ids = np.empty(capacity, dtype=np.int64)
        ids[: len(self)] = self._ids[: len(self)]

        self._vectors = vectors
        self._ids = ids

    def add(self, id: int, components) -> None:
        id = int(id)
        if id in self._rows:
            raise KeyError(f"object {id} is already indexed")

        components = np.asarray(components, dtype=np.float32)
        if components.shape != (self.dimension,):
            raise DimensionError(
                f"object {id} has shape {components.shape}, index dimension is {self.dimension}"
            )

        self._reserve(1)
        row = len(self)
        self._vectors[row] = components
        self._ids[row] = id
        self._rows[id] = row

    def extend(self, ids, vectors) -> None:
        for id, components in zip(ids, vectors):
            self.add(id, components)

    def matrix(self, ids) -> np.ndarray:
        rows = np.fromiter((self._rows[int(i)] for i in ids), dtype=np.int64, count=len(ids))
        return self._vectors[rows]

    def vector(self, id) -> np.ndarray:
        return self._vectors[self._rows[int(id)]]

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: len(self)]

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors[: len(self)]

    def dataset(self) -> Dataset:
        return Dataset(self.vectors.copy(), ids=self.ids.copy())


class Index:
    """A tree of learned classifiers whose leaves are buckets of object ids.

    Single writer, many readers: `search` and `traverse` never mutate, any
    structural change needs exclusive access.
    """

    def __init__(self, dimension: int, settings: IndexSettings = IndexSettings()):
        assert dimension > 0

        self.dimension = dimension
        self.settings = settings
        self.store = VectorStore(dimension)
        self.root = LeafNode(())
        self.build_cost = Cost()

    def __len__(self) -> int:
        return len(self.store)

    def nodes(self) -> Iterator:
        """Preorder walk."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.extend(reversed(node.children))

    def leaves(self) -> list[LeafNode]:
        return [n for n in self.nodes() if n.is_leaf]

    def node(self, pos: tuple):
        node = self.root
        for depth, i in enumerate(pos):
            if node.is_leaf or not 0 <= i < len(node.children):
                raise KeyError(f"no node at {format_pos(pos[: depth + 1])}")
            node = node.children[i]
        return node

    def parent(self, pos: tuple) -> Optional[InnerNode]:
        return None if len(pos) == 0 else self.node(pos[:-1])

    def replace(self, pos: tuple, node) -> None:
        if len(pos) == 0:
            self.root = node
        else:
            self.node(pos[:-1]).children[pos[-1]] = node

    def renumber(self, node=None, pos: tuple = ()) -> None:
        """Rewrite every position below `node` from its actual location."""
        if node is None:
            node = self.root
        node.pos = pos
        if not node.is_leaf:
            for i, child in enumerate(node.children):
                self.renumber(child, pos + (i,))

    def subtree(self, pos: tuple) -> tuple[list[LeafNode], list[InnerNode]]:
        """The leaf and inner nodes of the subtree rooted at `pos`."""
        leaves, inners = [], []
        stack = [self.node(pos)]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                leaves.append(node)
            else:
                inners.append(node)
                stack.extend(reversed(node.children))
        return leaves, inners

    def node_seed(self, pos: tuple) -> int:
        state = np.random.SeedSequence([self.settings.seed, len(pos), *pos])
        return int(state.generate_state(1)[0])

    def train_node(self, pos: tuple, ids, n_child: int) -> tuple[InnerNode, int]:
        """Cluster `ids` into `n_child` groups, train a model, and disperse them.

        Returns the new inner node and its cost in distance computations.
        """
        ids = [int(i) for i in ids]
        if len(ids) == 0:
            raise ValueError(f"cannot train a node at {format_pos(pos)} without objects")
        if n_child < 1:
            raise ValueError(f"n_child must be positive, got {n_child}")

        seed = self.node_seed(pos)
        X = self.store.matrix(ids)

        clusters = kmeans(X, min(n_child, len(ids)), seed)
        model, positions = train_classifier(
            X,
            clusters.labels,
            n_child,
            kind=self.settings.kind,
            hyperparams=self.settings.hyperparams,
            seed=seed,
        )

        children = [LeafNode(pos + (i,)) for i in range(n_child)]
        for id, p in zip(ids, positions):
            children[p].objects.append(id)

        return InnerNode(pos, model, children), clusters.distance_computations + model.train_ops

    def _check_query(self, query) -> np.ndarray:
        query = as_components(query)
        if query.shape != (self.dimension,):
            raise DimensionError(
                f"query has shape {query.shape}, index dimension is {self.dimension}"
            )
        return query

    def route(self, components) -> LeafNode:
        node = self.root
        while not node.is_leaf:
            node = node.children[int(np.argmax(node.model.predict_proba(components)))]
        return node

    def place(self, id: int) -> LeafNode:
        """Route an object already in the store down to a leaf and append it there."""
        leaf = self.route(self.store.vector(id))
        leaf.objects.append(int(id))
        return leaf

    def insert(self, obj: Vector) -> tuple:
        components = self._check_query(obj.components)
        self.store.add(obj.id, components)
        return self.place(obj.id).pos

    def traverse(self, query, k: int) -> Iterator[SearchResult]:
        """Best-first walk by multiplied branch probabilities.

        Yields the running k best after every bucket scanned. Ties between
        equal scores go to the lexicographically smaller position.
        """
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        query = self._check_query(query)

        best_ids = np.empty(0, dtype=np.int64)
        best_sq = np.empty(0, dtype=np.float64)
        visited = 0
        scanned = 0

        queue = [(-1.0, self.root.pos, self.root)]
        while queue:
            neg_score, _, node = heapq.heappop(queue)

            if not node.is_leaf:
                proba = node.model.predict_proba(query)
                for child, p in zip(node.children, proba):
                    heapq.heappush(queue, (neg_score * p, child.pos, child))
                continue

            visited += 1
            if node.objects:
                ids = np.asarray(node.objects, dtype=np.int64)
                sq = squared_distances(self.store.matrix(ids), query)
                scanned += len(ids)

                best_ids = np.concatenate([best_ids, ids])
                best_sq = np.concatenate([best_sq, sq])
                keep = np.lexsort((best_ids, best_sq))[:k]
                best_ids, best_sq = best_ids[keep], best_sq[keep]

            yield SearchResult(
                neighbors=rank(best_ids, best_sq, k),
                buckets_visited=visited,
                objects_scanned=scanned,
                short=len(best_ids) < k,
            )

    def search(self, query, k: int, bucket_budget: int) -> SearchResult:
        if bucket_budget < 1:
            raise ValueError(f"bucket budget must be positive, got {bucket_budget}")

        result = None
        for result in self.traverse(query, k):
            if result.buckets_visited >= bucket_budget:
                break
        return result

    def check_consistency(self) -> Optional[Violation]:
        max_depth = self.settings.max_depth
        seen = {}

        stack = [(self.root, ())]
        while stack:
            node, actual = stack.pop()

            if node.pos != actual:
                return Violation(
                    "pos",
                    actual,
                    f"node at {format_pos(actual)} claims {format_pos(node.pos)}",
                )

            if node.is_leaf:
                for id in node.objects:
                    if id in seen:
                        return Violation(
                            "objects",
                            actual,
                            f"object {id} in {format_pos(seen[id])} and {format_pos(actual)}",
                        )
                    seen[id] = actual
                continue

            if len(node.children) != node.model.n_classes:
                return Violation(
                    "children",
                    actual,
                    f"{len(node.children)} children but the model has "
                    f"{node.model.n_classes} outputs",
                )
            if max_depth is not None and len(actual) >= max_depth:
                return Violation(
                    "depth",
                    actual,
                    f"inner node at depth {len(actual)} exceeds {max_depth} inner levels",
                )

            for i, child in enumerate(node.children):
                stack.append((child, actual + (i,)))

        for id in self.store.ids:
            if int(id) not in seen:
                return Violation("objects", None, f"object {int(id)} is in no leaf")
        if len(seen) != len(self.store):
            stray = next(id for id in seen if id not in self.store)
            return Violation(
                "objects", seen[stray], f"object {stray} is not in the vector store"
            )

        return None

    def stats(self) -> IndexStats:
        leaves, inners = [], []
        for node in self.nodes():
            (leaves if node.is_leaf else inners).append(node)

        occupancy = pd.Series(
            [len(leaf.objects) for leaf in leaves],
            index=[format_pos(leaf.pos) for leaf in leaves],
            dtype=np.int64,
            name="objects",
        )
        children = [len(n.children) for n in inners]

        return IndexStats(
            leaf_count=len(leaves),
            inner_count=len(inners),
            object_count=int(occupancy.sum()),
            depth=1 + max(len(n.pos) for n in leaves),
            inner_depth=1 + max((len(n.pos) for n in inners), default=-1),
            occupancy=occupancy,
            avg_occupancy=float(occupancy.mean()),
            children_min=min(children, default=0),
            children_max=max(children, default=0),
            children_mean=float(np.mean(children)) if children else 0.0,
        )


def build_static(
    dataset: Dataset,
    target_bucket_size: int = 1000,
    settings: IndexSettings = IndexSettings(),
) -> Index:
    """A single-level index: one root model over ceil(n / target) leaf buckets."""
    if len(dataset) == 0:
        raise ValueError("cannot build an index over an empty dataset")
    if target_bucket_size < 1:
        raise ValueError(f"target bucket size must be positive, got {target_bucket_size}")

    n_child = max(2, math.ceil(len(dataset) / target_bucket_size))

    start = time.perf_counter()
    index = Index(dataset.dimension, settings)
    index.store.extend(dataset.ids, dataset.vectors)
    index.root, ops = index.train_node((), dataset.ids, n_child)
    index.build_cost = Cost(time.perf_counter() - start, ops)

    log.info(
        "built static index over %d objects: %d leaves, %d distance computations",
        len(dataset),
        n_child,
        ops,
    )

    return index


def insert(index: Index, obj: Vector) -> tuple:
    return index.insert(obj)


def search(index: Index, query, k: int, bucket_budget: int) -> SearchResult:
    return index.search(query, k, bucket_budget)


def check_consistency(index: Index) -> Optional[Violation]:
    return index.check_consistency()


def stats(index: Index) -> IndexStats:
    return index.stats()
