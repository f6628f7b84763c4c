import pytest
import numpy as np

from dynlmi.core.vectors import (
    DimensionError,
    Vector,
    knn_bruteforce,
    split_queries,
    synthetic_dataset,
)
from dynlmi.index import tree
from dynlmi.index.tree import Index, IndexSettings, LeafNode


def data():
    return synthetic_dataset(300, 4, 5, seed=0)


def built():
    return tree.build_static(data(), 50, IndexSettings(seed=1))


def test_pos_formatting():
    assert tree.format_pos(()) == "r"
    assert tree.format_pos((0, 2)) == "r.0.2"
    assert tree.parse_pos("r.0.2") == (0, 2)
    assert tree.parse_pos("r") == ()

    with pytest.raises(ValueError):
        tree.parse_pos("0.2")


def test_build_static():
    index = built()

    assert len(index) == 300
    assert not index.root.is_leaf
    assert len(index.leaves()) == 6
    assert sorted(id for leaf in index.leaves() for id in leaf.objects) == list(range(300))
    assert index.build_cost.distance_computations > 0
    assert tree.check_consistency(index) is None


def test_build_static_small():
    # fewer objects than one bucket still gets two leaves
    index = tree.build_static(synthetic_dataset(10, 2, 2, seed=0), 1000)
    assert len(index.leaves()) == 2


def test_build_static_errors():
    with pytest.raises(ValueError):
        tree.build_static(synthetic_dataset(10, 2, 2, seed=0), 0)

    ds = synthetic_dataset(10, 2, 2, seed=0)
    with pytest.raises(ValueError):
        tree.build_static(ds[:0], 10)


def test_build_is_deterministic():
    a = built()
    b = built()

    assert [leaf.objects for leaf in a.leaves()] == [leaf.objects for leaf in b.leaves()]


def test_stats():
    s = tree.stats(built())

    assert s.leaf_count == 6
    assert s.inner_count == 1
    assert s.object_count == 300
    assert s.depth == 2
    assert s.inner_depth == 1
    assert s.avg_occupancy == pytest.approx(50.0)
    assert s.children_min == s.children_max == 6
    assert list(s.occupancy.index) == [f"r.{i}" for i in range(6)]


def test_stats_empty():
    s = Index(3).stats()

    assert s.leaf_count == 1
    assert s.inner_count == 0
    assert s.depth == 1
    assert s.inner_depth == 0
    assert s.avg_occupancy == 0.0


def test_search_full_budget_matches_bruteforce():
    ds = data()
    index = built()
    query = ds.vectors[17] + 0.1

    result = tree.search(index, query, 10, bucket_budget=6)
    expected = knn_bruteforce(ds, query, 10)

    assert result.buckets_visited == 6
    assert result.objects_scanned == 300
    assert [id for id, _ in result.neighbors] == [id for id, _ in expected]
    assert not result.short


def test_search_budget():
    index = built()
    result = index.search(data().vectors[0], 5, 1)

    assert result.buckets_visited == 1
    assert result.objects_scanned == len(index.route(data().vectors[0]).objects)

    with pytest.raises(ValueError):
        index.search(data().vectors[0], 5, 0)

    with pytest.raises(ValueError):
        index.search(data().vectors[0], 0, 1)

    with pytest.raises(DimensionError):
        index.search([0.0, 0.0], 5, 1)


def test_search_budget_beyond_leaves():
    index = built()
    result = index.search(data().vectors[0], 5, 100)
    assert result.buckets_visited == 6


def test_traverse_visits_every_bucket_once():
    index = built()
    results = list(index.traverse(data().vectors[3], 5))

    assert [r.buckets_visited for r in results] == [1, 2, 3, 4, 5, 6]
    scanned = [r.objects_scanned for r in results]
    assert scanned == sorted(scanned)
    assert scanned[-1] == 300


def test_search_short_results():
    index = Index(2)
    result = index.search([0.0, 0.0], 3, 1)
    assert result.neighbors == []
    assert result.short

    index.insert(Vector(5, np.array([1.0, 0.0])))
    result = index.search([0.0, 0.0], 3, 1)
    assert result.neighbors == [(5, pytest.approx(1.0))]
    assert result.short


def test_insert():
    index = built()
    v = Vector(1000, data().vectors[42] + 0.01)

    pos = tree.insert(index, v)

    assert len(index) == 301
    assert 1000 in index.node(pos).objects
    assert index.check_consistency() is None

    with pytest.raises(KeyError):
        index.insert(v)

    with pytest.raises(DimensionError):
        index.insert(Vector(1001, np.zeros(3)))


def test_insert_into_root_leaf():
    index = Index(2)
    assert index.insert(Vector(0, np.array([1.0, 2.0]))) == ()
    assert index.root.objects == [0]


def test_node_navigation():
    index = built()

    assert index.node(()) is index.root
    assert index.node((2,)) is index.root.children[2]
    assert index.parent((2,)) is index.root
    assert index.parent(()) is None

    with pytest.raises(KeyError):
        index.node((9,))

    with pytest.raises(KeyError):
        index.node((0, 0))


def test_consistency_detects_duplicates():
    index = built()
    leaves = index.leaves()
    leaves[1].objects.append(leaves[0].objects[0])

    violation = index.check_consistency()
    assert violation.code == "objects"


def test_consistency_detects_lost_objects():
    index = built()
    index.leaves()[0].objects.pop()

    violation = index.check_consistency()
    assert violation.code == "objects"
    assert violation.pos is None


def test_consistency_detects_bad_positions():
    index = built()
    index.root.children[0].pos = (4,)

    violation = index.check_consistency()
    assert violation.code == "pos"
    assert violation.pos == (0,)


def test_consistency_detects_child_count():
    index = built()
    index.root.children.append(LeafNode((6,)))

    assert index.check_consistency().code == "children"


def test_consistency_detects_depth():
    index = tree.build_static(data(), 50, IndexSettings(max_depth=1))
    child = index.root.children[0]
    inner, _ = index.train_node(child.pos, child.objects, 2)
    index.replace(child.pos, inner)

    assert index.check_consistency().code == "depth"


def test_build_single_object():
    index = tree.build_static(synthetic_dataset(1, 3, 1, seed=0), 1000)

    assert [len(leaf.objects) for leaf in index.leaves()] == [1, 0]
    assert index.check_consistency() is None


def test_stats_single_leaf():
    index = Index(2)
    for i in range(7):
        index.insert(Vector(i, np.array([float(i), 0.0])))

    s = index.stats()
    assert s.avg_occupancy == 7.0
    assert s.depth == 1
    assert s.occupancy.sum() == s.object_count == 7


def test_identical_vectors_share_a_leaf():
    index = built()
    components = data().vectors[100]

    assert index.insert(Vector(5000, components)) == index.insert(Vector(5001, components.copy()))


@pytest.mark.slow
def test_full_budget_matches_bruteforce_at_scale():
    base, queries = split_queries(synthetic_dataset(21000, 16, 20, seed=2), 1000, seed=2)
    index = tree.build_static(base, 1000, IndexSettings(seed=2))
    leaves = len(index.leaves())

    for query in queries:
        result = index.search(query, 10, bucket_budget=leaves)
        expected = knn_bruteforce(base, query, 10)

        assert result.objects_scanned == len(base)
        assert sorted(id for id, _ in result.neighbors) == sorted(id for id, _ in expected)
