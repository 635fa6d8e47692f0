"""Incremental k-d tree for exact nearest-neighbour distances."""

from __future__ import annotations

import math

import numpy as np


class SpatialIndex:
    """Unbalanced k-d tree supporting insertion and exact nearest squared distance.

    Nodes live in flat lists; node ``i`` splits on ``depth % dimension``.
    Points with a coordinate equal to the node's on the split axis go left.
    No rebalancing is done: samples from a mixing chain arrive in nearly
    random order, which keeps the expected depth logarithmic.

    ``visits`` counts nodes examined by all queries so far.
    """

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._points: list[tuple[float, ...]] = []
        self._axis: list[int] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self.visits = 0

    def __len__(self):
        return len(self._points)

    @property
    def size(self) -> int:
        return len(self._points)

    def _coerce(self, point) -> tuple[float, ...]:
        arr = np.asarray(point, dtype=float).reshape(-1)
        if arr.shape[0] != self.dimension:
            raise ValueError(f"expected a point of dimension {self.dimension}, got {arr.shape[0]}")
        return tuple(arr.tolist())

    def insert(self, point) -> "SpatialIndex":
        pt = self._coerce(point)
        if not all(math.isfinite(c) for c in pt):
            raise ValueError("cannot index a non-finite point")
        new = len(self._points)
        if new == 0:
            depth = 0
        else:
            node, depth = 0, 0
            while True:
                ax = self._axis[node]
                side = self._left if pt[ax] <= self._points[node][ax] else self._right
                child = side[node]
                depth += 1
                if child < 0:
                    side[node] = new
                    break
                node = child
        self._points.append(pt)
        self._axis.append(depth % self.dimension)
        self._left.append(-1)
        self._right.append(-1)
        return self

    def extend(self, points) -> "SpatialIndex":
        for p in points:
            self.insert(p)
        return self

    def nearest_sq_distance(self, query) -> float:
        """Squared Euclidean distance to the closest stored point; +inf when empty."""
        q = self._coerce(query)
        if not self._points:
            return math.inf
        pts, axes, left, right = self._points, self._axis, self._left, self._right
        best = math.inf
        visits = 0
        # stack of (node, lower bound on the squared distance to anything in its subtree)
        stack = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if bound >= best:
                continue
            visits += 1
            p = pts[node]
            d2 = 0.0
            for a, b in zip(q, p):
                d2 += (a - b) * (a - b)
            if d2 < best:
                best = d2
                if best == 0.0:
                    break
            ax = axes[node]
            diff = q[ax] - p[ax]
            near, far = (left[node], right[node]) if diff <= 0 else (right[node], left[node])
            if far >= 0:
                stack.append((far, max(bound, diff * diff)))
            if near >= 0:
                stack.append((near, bound))
        self.visits += visits
        return best

    def nearest_sq_distances(self, queries) -> np.ndarray:
        return np.array([self.nearest_sq_distance(q) for q in queries], dtype=float)

    def points(self) -> np.ndarray:
        return np.array(self._points, dtype=float).reshape(-1, self.dimension)

    def check_invariants(self) -> None:
        """Raise AssertionError if any node violates the left <= / right > ordering."""
        pts, axes = self._points, self._axis

        def walk(node, depth, constraints):
            if node < 0:
                return 0
            p = pts[node]
            assert axes[node] == depth % self.dimension, "split axis out of cycle"
            for ax, value, go_left in constraints:
                if go_left:
                    assert p[ax] <= value, f"node {node} should be <= {value} on axis {ax}"
                else:
                    assert p[ax] > value, f"node {node} should be > {value} on axis {ax}"
            ax = axes[node]
            n = 1
            n += walk(self._left[node], depth + 1, constraints + [(ax, p[ax], True)])
            n += walk(self._right[node], depth + 1, constraints + [(ax, p[ax], False)])
            return n

        if pts:
            assert walk(0, 0, []) == len(pts), "tree does not reach every stored point"
