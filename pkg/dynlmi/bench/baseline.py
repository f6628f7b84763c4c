import logging
import numpy as np

from collections import namedtuple
from typing import Optional

from dynlmi.core.vectors import Dataset, Vector, ground_truth
from dynlmi.index.tree import Cost, Index, IndexSettings, build_static
from dynlmi.model.kmeans import kmeans

from .cost import budget_sweep, search_cost_at


log = logging.getLogger(__name__)

RebuildPolicy = namedtuple(
    "RebuildPolicy",
    field_names=["kind", "rebuild_interval"],
    defaults=["none", None],
)

Snapshot = namedtuple(
    "Snapshot",
    field_names=[
        "inserts",
        "db_size",
        "builds",
        "build_cost",
        "leaf_count",
        "curve",
        "search_costs",
    ],
)
Snapshot.__doc__ = """Index state at one probe point of a lifecycle.

`build_cost` is cumulative over every build so far, `curve` the recall and
objects-scanned sweep over bucket budgets, `search_costs` the SearchCost
per measured target recall.
"""

Lifecycle = namedtuple("Lifecycle", ["index", "snapshots"])

STREAM_MODES = ("shuffle", "shift")


def validate_rebuild_policy(policy: RebuildPolicy) -> RebuildPolicy:
    if policy.kind not in ("none", "naive"):
        raise ValueError(f"unknown rebuild policy: {policy.kind}")
    if policy.kind == "naive" and (policy.rebuild_interval is None or policy.rebuild_interval < 1):
        raise ValueError(f"naive rebuild needs an interval >= 1, got {policy.rebuild_interval}")
    return policy


def insert_stream(
    dataset: Dataset,
    mode: str = "shuffle",
    seed: int = 0,
    n_clusters: int = 10,
) -> Dataset:
    """Reorder a dataset as an insert stream.

    `shuffle` is a seeded permutation. `shift` additionally groups vectors by
    cluster, so later inserts come from regions the early index never saw.
    Clusters are the generator's when known, else k-means labels.
    """
    if mode not in STREAM_MODES:
        raise ValueError(f"unknown stream mode: {mode}")

    rng = np.random.default_rng(seed)
    shuffled = dataset[rng.permutation(len(dataset))]
    if mode == "shuffle" or len(dataset) == 0:
        return shuffled

    labels = shuffled.labels
    if labels is None:
        labels = kmeans(shuffled.vectors, min(n_clusters, len(shuffled)), seed).labels

    return shuffled[np.argsort(labels, kind="stable")]


def default_probes(stream_length: int, count: int = 10) -> list[int]:
    return sorted({round(i * stream_length / count) for i in range(count + 1)})


def probe(
    index: Index,
    queries: Dataset,
    k: int,
    target_recalls,
    timing: bool = True,
    workers: int = 1,
) -> tuple:
    """Ground truth over the current contents, then SC at each target recall."""
    truth = ground_truth(index.store.dataset(), queries, k)
    curve = budget_sweep(index, queries, truth, k, target=max(target_recalls), workers=workers)
    costs = {
        tr: search_cost_at(index, curve, tr, queries, k, timing=timing)
        for tr in target_recalls
    }
    return curve, costs


def run_lifecycle(
    initial: Dataset,
    stream: Dataset,
    policy: RebuildPolicy = RebuildPolicy(),
    probe_points: Optional[list[int]] = None,
    queries: Optional[Dataset] = None,
    k: int = 30,
    target_recalls=(0.5, 0.9),
    bucket_size: int = 1000,
    settings: IndexSettings = IndexSettings(),
    timing: bool = True,
) -> Lifecycle:
    """Build a static index, then stream inserts into it under a rebuild policy.

    With `naive`, the insert that makes inserts-since-build reach the
    rebuild interval triggers a from-scratch rebuild over every current
    object, and the counter restarts from zero.
    """
    validate_rebuild_policy(policy)

    overlap = np.intersect1d(initial.ids, stream.ids)
    if len(overlap) > 0:
        raise KeyError(f"insert stream repeats {len(overlap)} initial ids, e.g. {int(overlap[0])}")

    probe_points = set(default_probes(len(stream)) if probe_points is None else probe_points)
    measure = queries is not None and len(queries) > 0 and len(target_recalls) > 0

    index = build_static(initial, bucket_size, settings)
    builds = 1
    build_cost = index.build_cost
    since_build = 0
    snapshots = []

    def snapshot(inserts):
        curve, costs = None, {}
        if measure:
            curve, costs = probe(index, queries, k, target_recalls, timing=timing)
        snapshots.append(
            Snapshot(
                inserts=inserts,
                db_size=len(index),
                builds=builds,
                build_cost=build_cost,
                leaf_count=len(index.leaves()),
                curve=curve,
                search_costs=costs,
            )
        )

    for i, obj in enumerate(stream):
        if i in probe_points:
            snapshot(i)

        if policy.kind == "naive" and since_build + 1 == policy.rebuild_interval:
            current = index.store.dataset().concat(
                Dataset(obj.components[None, :], ids=[obj.id])
            )
            index = build_static(current, bucket_size, settings)
            builds += 1
            build_cost = build_cost + index.build_cost
            since_build = 0
            log.info("rebuild %d after %d inserts, %d objects", builds - 1, i + 1, len(index))
        else:
            index.insert(obj)
            since_build += 1

    if len(stream) in probe_points:
        snapshot(len(stream))

    return Lifecycle(index, snapshots)
