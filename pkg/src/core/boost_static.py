"""
Boosting with static features: every tree leaf is a curve on the time grid.

The loss of one individual is half the squared L2 distance between its
empirical MCF and the ensemble prediction over its observed window, so the
gradient is g = mu_hat - mu_tilde and the hessian is h = 1 (zero after
censoring). Leaves minimise the node objective pointwise in time with a
ridge penalty gamma2; splits are scored by the drop in that objective minus
the leaf penalty gamma1.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.core.data import Curve, Dataset, TimeGrid, curve_integral
from src.core.errors import GridMismatchError, InvalidArgumentError
from src.core.trees import SplitRule, Tree, grow_levelwise, search_splits

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoostConfig:
    """Hyperparameters shared by the static and dynamic boosters."""
    K: int = 50
    gamma1: float = 0.0
    gamma2: float = 0.0
    d_max: int = 4
    min_leaf: int = 5
    max_thresholds: int = 32
    seed: int = 0
    learning_rate: float = 1.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise InvalidArgumentError(f"K must be >= 1, got {self.K}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise InvalidArgumentError("gamma1 and gamma2 must be non-negative")
        if self.d_max < 2:
            raise InvalidArgumentError(f"d_max must be >= 2, got {self.d_max}")
        if self.min_leaf < 1:
            raise InvalidArgumentError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_thresholds < 1:
            raise InvalidArgumentError(f"max_thresholds must be >= 1, got {self.max_thresholds}")
        if not 0 < self.learning_rate <= 1:
            raise InvalidArgumentError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.n_jobs == 0:
            raise InvalidArgumentError("n_jobs must be non-zero")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict) -> 'BoostConfig':
        return cls(**values)


# Array kernels. Rows are nodes (or candidate children), columns grid points.

def leaf_values(G: np.ndarray, H: np.ndarray, gamma2: float) -> np.ndarray:
    denom = H + gamma2
    out = np.zeros(np.shape(G))
    np.divide(-np.asarray(G, dtype=float), denom, out=out, where=denom > 0)
    return out


def node_scores(G: np.ndarray, H: np.ndarray, gamma2: float, weights: np.ndarray) -> np.ndarray:
    denom = H + gamma2
    ratio = np.zeros(np.shape(G))
    np.divide(np.square(G), denom, out=ratio, where=denom > 0)
    return -0.5 * (ratio @ weights)


def risk_weights(dataset: Dataset) -> np.ndarray:
    """Per-individual quadrature weights relative to the full-grid weights (n x m)."""
    return dataset.weight_matrix / dataset.grid.weights()[None, :]


def half_squared_distance(mu_tilde: np.ndarray, mu_hat: np.ndarray, weights: np.ndarray) -> float:
    return float(0.5 * np.sum(weights * np.square(mu_hat - mu_tilde)))


# Curve-level operations

def loss(mu_tilde: Curve, mu_hat: Curve) -> float:
    """Half the squared L2 distance over the observed window."""
    diff = mu_hat - mu_tilde
    return 0.5 * curve_integral(diff, diff)


def gradients(mu_tilde: Curve, mu_hat: Curve) -> Tuple[Curve, Curve]:
    """
    First and second functional derivatives of the loss.

    Returns:
        (g, h) with g = mu_hat - mu_tilde and h = 1 on observed points, both
        zero after censoring
    """
    if mu_tilde.grid != mu_hat.grid:
        raise GridMismatchError(f"grid {mu_hat.grid} does not match {mu_tilde.grid}")
    mask = mu_tilde.mask & mu_hat.mask
    g = np.where(mask, mu_hat.values - mu_tilde.values, 0.0)
    return Curve(mu_tilde.grid, g, mask), Curve(mu_tilde.grid, mask.astype(float), mask)


def aggregate_node(g_curves: Sequence[Curve], h_curves: Sequence[Curve]) -> Tuple[Curve, Curve]:
    """
    Sum member gradients into node totals on the full grid.

    Each member is scaled by its quadrature weights relative to the full-grid
    weights, so an integral of the totals over the grid equals the sum of the
    members' integrals over their own observed windows.
    """
    if not g_curves:
        raise InvalidArgumentError("node has no members")
    grid = g_curves[0].grid
    gsum = np.zeros(grid.m)
    hsum = np.zeros(grid.m)
    for g, h in zip(g_curves, h_curves):
        if g.grid != grid or h.grid != grid:
            raise GridMismatchError("node members are on different grids")
        ratio = grid.relative_weights(min(g.n_observed, h.n_observed))
        gsum += ratio * g.values
        hsum += ratio * h.values
    return Curve(grid, gsum), Curve(grid, hsum)


def optimal_leaf(gsum: Curve, hsum: Curve, gamma2: float) -> Curve:
    """Pointwise minimiser f = -gsum / (hsum + gamma2), zero where the denominator vanishes."""
    return Curve(gsum.grid, leaf_values(gsum.values, hsum.values, gamma2))


def node_score(gsum: Curve, hsum: Curve, gamma2: float) -> float:
    """Node objective at its optimal leaf: -1/2 * integral of gsum^2 / (hsum + gamma2)."""
    if gsum.grid != hsum.grid:
        raise GridMismatchError(f"grid {hsum.grid} does not match {gsum.grid}")
    n_obs = min(gsum.n_observed, hsum.n_observed)
    return float(node_scores(gsum.values, hsum.values, gamma2, gsum.grid.weights(n_obs)))


def split_gain_G1(parent_score: float, left_score: float, right_score: float, gamma1: float) -> float:
    return parent_score - left_score - right_score - gamma1


def find_best_split(node_rows: np.ndarray, X: np.ndarray, G: np.ndarray, H: np.ndarray,
                    weights: np.ndarray, config: BoostConfig) -> Optional[Tuple[SplitRule, float]]:
    """
    Best split of one node by gain G1.

    Args:
        node_rows: Row indices of the node's individuals
        X: Static feature matrix of all individuals
        G: Risk-weighted gradient matrix (n x m)
        H: Risk-weighted hessian matrix (n x m)
        weights: Full-grid quadrature weights
        config: Boosting configuration

    Returns:
        (rule, gain) or None when no split has positive gain
    """
    node_rows = np.asarray(node_rows, dtype=int)
    G_node, H_node = G[node_rows], H[node_rows]
    G_total, H_total = G_node.sum(axis=0), H_node.sum(axis=0)
    parent = node_scores(G_total, H_total, config.gamma2, weights)

    def gains(feature, order, positions):
        cum_g = np.cumsum(G_node[order], axis=0)[positions - 1]
        cum_h = np.cumsum(H_node[order], axis=0)[positions - 1]
        left = node_scores(cum_g, cum_h, config.gamma2, weights)
        right = node_scores(G_total - cum_g, H_total - cum_h, config.gamma2, weights)
        return split_gain_G1(parent, left, right, config.gamma1)

    return search_splits(X[node_rows], gains, config.min_leaf, config.max_thresholds, config.n_jobs)


def grow_tree(X: np.ndarray, G: np.ndarray, H: np.ndarray, grid: TimeGrid, config: BoostConfig) -> Tree:
    """
    Grow one tree on risk-weighted gradients and store the optimal leaf curves.

    Leaves are scaled by the learning rate.
    """
    weights = grid.weights()
    root, leaf_rows = grow_levelwise(
        X.shape[0], config.d_max,
        lambda rows: find_best_split(rows, X, G, H, weights, config),
        lambda rule, rows: rule.goes_left(X[rows]),
    )
    tree = Tree(root)
    for leaf, rows in zip(tree.leaves, leaf_rows):
        values = leaf_values(G[rows].sum(axis=0), H[rows].sum(axis=0), config.gamma2)
        leaf.value = Curve(grid, config.learning_rate * values)
    return tree


def tree_contribution(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf curve values reached by every row of X (n x m)."""
    table = np.vstack([leaf.value.values for leaf in tree.leaves])
    return table[tree.apply(X)]


@dataclass
class EnsembleStatic:
    """Additive ensemble of curve-leaf trees."""
    grid: TimeGrid
    config: BoostConfig
    p: int
    trees: List[Tree] = field(default_factory=list)
    importance_raw: Optional[np.ndarray] = None
    training_loss: List[float] = field(default_factory=list)
    feature_ranges: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.importance_raw is None:
            self.importance_raw = np.zeros(self.p)

    @property
    def leaves_per_tree(self) -> List[int]:
        return [tree.n_leaves for tree in self.trees]

    def _check_features(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise InvalidArgumentError(f"expected {self.p} static features, got {X.shape[1]}")
        return X

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = self._check_features(X)
        out = np.zeros((X.shape[0], self.grid.m))
        for tree in self.trees:
            out += tree_contribution(tree, X)
        return out

    def contribution_trace(self, x: np.ndarray) -> np.ndarray:
        """Cumulative prediction for one individual after 0, 1, ..., K trees ((K+1) x m)."""
        X = self._check_features(x)
        steps = [np.zeros(self.grid.m)] + [tree_contribution(tree, X)[0] for tree in self.trees]
        return np.cumsum(np.vstack(steps), axis=0)


def fit_static(dataset: Dataset, config: BoostConfig, progress: bool = False) -> EnsembleStatic:
    """
    Stagewise boosting of K curve-leaf trees starting from mu_hat = 0.

    Args:
        dataset: Training data (dynamic series, if any, are ignored)
        config: Boosting configuration
        progress: Show a progress bar

    Returns:
        Fitted EnsembleStatic with its training-loss trace
    """
    X = dataset.X
    grid = dataset.grid
    mu_tilde = dataset.mcf_matrix
    ratio = risk_weights(dataset)
    obs_weights = dataset.weight_matrix
    mu_hat = np.zeros_like(mu_tilde)

    ensemble = EnsembleStatic(grid, config, dataset.p,
                              feature_ranges=np.column_stack([X.min(axis=0), X.max(axis=0)]))
    ensemble.training_loss.append(half_squared_distance(mu_tilde, mu_hat, obs_weights))
    logger.info("Boosting %d trees on %d individuals (p=%d, m=%d)", config.K, dataset.n, dataset.p, grid.m)

    for k in tqdm(range(config.K), desc='trees', disable=not progress):
        G = ratio * (mu_hat - mu_tilde)
        tree = grow_tree(X, G, ratio, grid, config)
        mu_hat += tree_contribution(tree, X)
        for node in tree.internal_nodes():
            ensemble.importance_raw[node.rule.feature] += node.gain
        ensemble.trees.append(tree)
        ensemble.training_loss.append(half_squared_distance(mu_tilde, mu_hat, obs_weights))
        logger.info("Tree %d: %d leaves, training loss %.6g", k + 1, tree.n_leaves, ensemble.training_loss[-1])
    return ensemble


def predict_static(ensemble: EnsembleStatic, x, clamp: bool = False) -> Curve:
    """
    Sum of the leaf curves x reaches in every tree.

    Args:
        ensemble: Fitted ensemble
        x: Static feature vector of length p
        clamp: Set negative values to zero

    Returns:
        Predicted cumulative intensity on the training grid
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError("x must be a single feature vector")
    curve = Curve(ensemble.grid, ensemble.predict_matrix(x)[0])
    return curve.clamped() if clamp else curve


def feature_importance(ensemble: EnsembleStatic, standardize: bool = False) -> np.ndarray:
    """
    Split-gain importance of every static feature, scaled by 1/K^2.

    With standardize the values are mapped affinely so the largest is 1 and
    the smallest 0 (all zeros when every feature ties).
    """
    K = len(ensemble.trees)
    raw = ensemble.importance_raw / K ** 2 if K else np.zeros(ensemble.p)
    if not standardize:
        return raw
    spread = raw.max() - raw.min() if raw.size else 0.0
    if spread <= 0:
        return np.zeros_like(raw)
    return (raw - raw.min()) / spread
