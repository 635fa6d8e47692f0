import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spreadnuts.kdtree import SpatialIndex


def brute(points, q):
    return min(float(np.sum((np.asarray(p) - q) ** 2)) for p in points)


def test_empty_is_infinite():
    assert SpatialIndex(2).nearest_sq_distance([1.0, 2.0]) == math.inf


def test_first_insert_becomes_root():
    idx = SpatialIndex(2).insert([1.0, 2.0])
    assert idx.size == 1
    assert idx.points().tolist() == [[1.0, 2.0]]


def test_duplicates():
    idx = SpatialIndex(2)
    idx.insert([1.0, 1.0]).insert([1.0, 1.0])
    assert len(idx) == 2
    assert idx.nearest_sq_distance([1.0, 1.0]) == 0.0
    idx.check_invariants()


def test_pythagorean_example():
    idx = SpatialIndex(2).insert([0.0, 0.0])
    assert idx.nearest_sq_distance([3.0, 4.0]) == 25.0


def test_errors():
    idx = SpatialIndex(2)
    with pytest.raises(ValueError):
        idx.insert([1.0])
    with pytest.raises(ValueError):
        idx.insert([1.0, math.nan])
    with pytest.raises(ValueError):
        idx.nearest_sq_distance([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        SpatialIndex(0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_structure_after_random_inserts(d):
    rng = np.random.default_rng(d)
    idx = SpatialIndex(d).extend(rng.uniform(-20, 20, size=(1000, d)))
    assert idx.size == 1000
    idx.check_invariants()


def test_ties_go_left():
    idx = SpatialIndex(1).extend([[0.0], [0.0], [1.0]])
    assert idx._left[0] == 1 and idx._right[0] == 2


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_exact_against_linear_scan(d):
    rng = np.random.default_rng(10 + d)
    pts = rng.uniform(-20, 20, size=(1000, d))
    idx = SpatialIndex(d).extend(pts)
    for q in rng.uniform(-25, 25, size=(100, d)):
        assert idx.nearest_sq_distance(q) == np.min(np.sum((pts - q) ** 2, axis=1))


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 4).flatmap(
        lambda d: st.tuples(
            st.just(d),
            st.lists(st.lists(st.integers(-5, 5).map(float), min_size=d, max_size=d), min_size=1, max_size=60),
            st.lists(st.lists(st.floats(-6, 6), min_size=d, max_size=d), min_size=1, max_size=10),
        )
    )
)
def test_exact_with_many_ties(case):
    d, points, queries = case
    idx = SpatialIndex(d).extend(points)
    idx.check_invariants()
    for q in queries:
        assert idx.nearest_sq_distance(q) == brute(points, np.asarray(q))


def test_insertion_never_increases_distance():
    rng = np.random.default_rng(7)
    idx = SpatialIndex(2)
    queries = rng.normal(size=(30, 2)) * 5
    prev = np.full(30, math.inf)
    for p in rng.normal(size=(300, 2)) * 5:
        idx.insert(p)
        cur = idx.nearest_sq_distances(queries)
        assert np.all(cur <= prev)
        prev = cur


def test_visits_grow_sublinearly():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-20, 20, size=(100_000, 3))
    idx = SpatialIndex(3)
    queries = rng.uniform(-20, 20, size=(300, 3))
    mean_visits = {}
    for n in (1_000, 10_000, 100_000):
        idx.extend(pts[idx.size : n])
        before = idx.visits
        idx.nearest_sq_distances(queries)
        mean_visits[n] = (idx.visits - before) / len(queries)
    # 100x more points costs far less than 100x more visits
    assert mean_visits[100_000] < 10 * mean_visits[1_000]
    assert mean_visits[100_000] < 0.01 * 100_000
