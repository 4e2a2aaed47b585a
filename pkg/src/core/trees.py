"""
Binary tree structure and the split search shared by every booster.

Trees split on static features with the rule x[feature] <= threshold going
left. Leaves carry a payload owned by the booster that grew them: a Curve for
static boosting, a LeafSplineModel for dynamic boosting and a float for the
time-as-feature baseline.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Iterator, List, Optional, Tuple

import numpy as np

from src.utils.parallel import ordered_map

logger = logging.getLogger(__name__)

# gain_fn(feature, order, positions) -> gains; order sorts the node's rows by the
# feature and a position k sends the first k sorted rows left.
GainFunction = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SplitRule:
    """x[feature] <= threshold goes left; feature is a 0-based column index."""
    feature: int
    threshold: float

    def goes_left(self, X: np.ndarray) -> np.ndarray:
        return X[..., self.feature] <= self.threshold


@dataclass
class Node:
    rule: Optional[SplitRule] = None
    left: Optional['Node'] = None
    right: Optional['Node'] = None
    gain: float = 0.0
    value: Any = None

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    def preorder(self) -> Iterator['Node']:
        yield self
        if not self.is_leaf:
            yield from self.left.preorder()
            yield from self.right.preorder()


class Tree:
    """A grown tree; leaves are numbered in preorder."""

    def __init__(self, root: Node):
        self.root = root
        self._leaves = [node for node in root.preorder() if node.is_leaf]

    @property
    def leaves(self) -> List[Node]:
        return self._leaves

    @property
    def n_leaves(self) -> int:
        return len(self._leaves)

    def internal_nodes(self) -> List[Node]:
        return [node for node in self.root.preorder() if not node.is_leaf]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Preorder leaf index reached by every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0], dtype=int)
        leaf_ids = {id(leaf): k for k, leaf in enumerate(self._leaves)}

        def route(node: Node, rows: np.ndarray):
            if node.is_leaf:
                out[rows] = leaf_ids[id(node)]
                return
            left = node.rule.goes_left(X[rows])
            route(node.left, rows[left])
            route(node.right, rows[~left])

        route(self.root, np.arange(X.shape[0]))
        return out

    def leaf_for(self, x: np.ndarray) -> Node:
        node = self.root
        while not node.is_leaf:
            node = node.left if node.rule.goes_left(x) else node.right
        return node

    def leaf_regions(self, p: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        """
        Axis-aligned region of every leaf.

        Returns:
            (lower, upper) bound arrays per leaf in preorder; a row x is in the
            region iff lower < x <= upper componentwise (infinite when unbounded)
        """
        regions = []

        def walk(node: Node, lower: np.ndarray, upper: np.ndarray):
            if node.is_leaf:
                regions.append((lower, upper))
                return
            f, thr = node.rule.feature, node.rule.threshold
            left_upper = upper.copy()
            left_upper[f] = min(upper[f], thr)
            right_lower = lower.copy()
            right_lower[f] = max(lower[f], thr)
            walk(node.left, lower, left_upper)
            walk(node.right, right_lower, upper)

        walk(self.root, np.full(p, -np.inf), np.full(p, np.inf))
        return regions


def candidate_positions(sorted_values: np.ndarray, min_leaf: int, max_thresholds: int) -> np.ndarray:
    """
    Split positions k (first k sorted rows go left) between distinct values.

    Only positions leaving at least min_leaf rows on each side are kept; when
    more than max_thresholds remain, evenly spaced ones are chosen.
    """
    n = sorted_values.size
    k = np.arange(1, n)
    distinct = sorted_values[1:] > sorted_values[:-1]
    valid = distinct & (k >= min_leaf) & (n - k >= min_leaf)
    positions = k[valid]
    if positions.size > max_thresholds:
        picks = np.unique(np.round(np.linspace(0, positions.size - 1, max_thresholds)).astype(int))
        positions = positions[picks]
    return positions


def search_splits(X_node: np.ndarray, gain_fn: GainFunction, min_leaf: int,
                  max_thresholds: int, n_jobs: int = 1) -> Optional[Tuple[SplitRule, float]]:
    """
    Best (rule, gain) over all features and candidate thresholds of a node.

    Features are scored independently (in parallel when n_jobs > 1) and reduced
    in feature order, so the lowest feature and then the lowest threshold win
    ties. Returns None unless the best gain is positive.

    Args:
        X_node: Feature rows of the node's members
        gain_fn: Scores every candidate position of one feature
        min_leaf: Minimum rows per child
        max_thresholds: Cap on candidates per feature
        n_jobs: Worker count for the per-feature scan
    """
    n, p = X_node.shape
    if n < 2 * min_leaf or p == 0:
        return None

    def scan(feature: int):
        values = X_node[:, feature]
        order = np.argsort(values, kind='stable')
        sorted_values = values[order]
        positions = candidate_positions(sorted_values, min_leaf, max_thresholds)
        if positions.size == 0:
            return None
        gains = np.asarray(gain_fn(feature, order, positions), dtype=float)
        best = int(np.argmax(gains))
        below, above = sorted_values[positions[best] - 1], sorted_values[positions[best]]
        threshold = 0.5 * (below + above)
        if threshold >= above:
            threshold = below
        return SplitRule(feature, float(threshold)), float(gains[best])

    best = None
    for result in ordered_map(scan, range(p), n_jobs):
        if result is not None and (best is None or result[1] > best[1]):
            best = result
    if best is None or not best[1] > 0:
        return None
    return best


def grow_levelwise(n_rows: int, d_max: int,
                   find_split: Callable[[np.ndarray], Optional[Tuple[SplitRule, float]]],
                   goes_left: Callable[[SplitRule, np.ndarray], np.ndarray]) -> Tuple[Node, List[np.ndarray]]:
    """
    Grow a tree level by level, splitting every splittable leaf at once.

    Growth stops when no leaf of the current level splits or when the leaf
    count has reached d_max at the start of a level, so simultaneous splits
    may end above d_max.

    Args:
        n_rows: Number of rows routed to the root
        d_max: Leaf cap checked at the start of each level
        find_split: Best split of a node given its member rows, or None
        goes_left: Boolean mask of member rows sent left by a rule

    Returns:
        Root node and the member rows of every leaf in preorder
    """
    root = Node()
    members = {id(root): np.arange(n_rows)}
    frontier = [root]
    n_leaves = 1
    level = 0
    while frontier and n_leaves < d_max:
        next_frontier = []
        for node in frontier:
            rows = members[id(node)]
            split = find_split(rows)
            if split is None:
                continue
            rule, gain = split
            left_mask = goes_left(rule, rows)
            node.rule, node.gain = rule, gain
            node.left, node.right = Node(), Node()
            members[id(node.left)] = rows[left_mask]
            members[id(node.right)] = rows[~left_mask]
            next_frontier.extend([node.left, node.right])
            n_leaves += 1
        logger.debug("Level %d: %d split(s), %d leaves", level, len(next_frontier) // 2, n_leaves)
        frontier = next_frontier
        level += 1
    leaf_rows = [members[id(node)] for node in root.preorder() if node.is_leaf]
    return root, leaf_rows
