"""
Boosting with static and dynamic features.

Trees still split on static features, but every leaf carries spline
coefficients beta (n_basis x q). An individual's leaf contribution at time t
is sum_l sum_b beta[b, l] * integral_0^t B_b(z_l(tau)) dtau, so its leaf
objective is a quadratic in beta plus a group-lasso penalty with one group
per dynamic feature.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.core.boost_static import BoostConfig, half_squared_distance
from src.core.data import Curve, Dataset, DynamicSeries, TimeGrid
from src.core.errors import InvalidArgumentError, UnsupportedOperationError
from src.core.group_lasso import (GroupLassoResult, NodeQuadratic, contiguous_groups, f2_value,
                                  group_lasso_fit)
from src.core.splines import SplineBasis, build_bases, integrated_features
from src.core.trees import Tree, grow_levelwise, search_splits

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LeafSplineModel:
    """Spline coefficients of one leaf with the solver diagnostics of its fit."""
    beta: np.ndarray
    sweeps: int = 0
    kkt_residual: float = 0.0
    converged: bool = True

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.ndim != 2:
            raise InvalidArgumentError("beta must be an n_basis x q matrix")
        beta.setflags(write=False)
        object.__setattr__(self, 'beta', beta)

    @classmethod
    def from_flat(cls, flat: np.ndarray, n_basis: int, q: int,
                  result: Optional[GroupLassoResult] = None, scale: float = 1.0) -> 'LeafSplineModel':
        beta = scale * np.asarray(flat, dtype=float).reshape(q, n_basis).T
        if result is None:
            return cls(beta)
        return cls(beta, result.sweeps, result.kkt_residual, result.converged)

    @property
    def flat(self) -> np.ndarray:
        """Coefficients in design-column order (group l is a contiguous block)."""
        return self.beta.T.reshape(-1)

    def group_norms(self) -> np.ndarray:
        return np.linalg.norm(self.beta, axis=0)


def assemble_quadratic(phis: Sequence[np.ndarray], g_curves: Sequence[Curve], h_curves: Sequence[Curve],
                       dim: Optional[int] = None) -> NodeQuadratic:
    """
    Node quadratic A = sum_i int h_i Phi_i Phi_i' dt and b = sum_i int g_i Phi_i dt.

    Args:
        phis: Flattened integrated design (m x dim) of every member
        g_curves: Member gradients
        h_curves: Member hessians
        dim: Design width, required only for an empty node

    Returns:
        NodeQuadratic over each member's observed window
    """
    if not phis:
        if dim is None:
            raise InvalidArgumentError("dim is required for an empty node")
        return NodeQuadratic.zeros(dim)
    dim = phis[0].shape[1] if dim is None else dim
    A = np.zeros((dim, dim))
    b = np.zeros(dim)
    for phi, g, h in zip(phis, g_curves, h_curves):
        if phi.shape != (g.grid.m, dim):
            raise InvalidArgumentError(f"design has shape {phi.shape}, expected {(g.grid.m, dim)}")
        w = g.grid.weights(min(g.n_observed, h.n_observed))
        A += phi.T @ ((w * h.values)[:, None] * phi)
        b += phi.T @ (w * g.values)
    return NodeQuadratic(A, b)


def split_gain_G2(parent: NodeQuadratic, left: NodeQuadratic, right: NodeQuadratic,
                  gamma1: float, gamma2: float, groups: Sequence[np.ndarray],
                  warm_start: Optional[np.ndarray] = None) -> float:
    """G2 = F2(parent) - F2(left) - F2(right) - 2 * gamma1, each F2 at its own fitted beta."""
    values = []
    for Q in (parent, left, right):
        result = group_lasso_fit(Q, gamma2, groups, beta0=warm_start)
        values.append(f2_value(Q, result.beta))
    return values[0] - values[1] - values[2] - 2.0 * gamma1


@dataclass
class EnsembleDynamic:
    """Additive ensemble of spline-leaf trees."""
    grid: TimeGrid
    config: BoostConfig
    bases: Tuple[SplineBasis, ...]
    p: int
    trees: List[Tree] = field(default_factory=list)
    importance_raw: Optional[np.ndarray] = None
    training_loss: List[float] = field(default_factory=list)
    feature_ranges: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.importance_raw is None:
            self.importance_raw = np.zeros(self.p)

    @property
    def q(self) -> int:
        return len(self.bases)

    @property
    def n_basis(self) -> int:
        return self.bases[0].n_basis if self.bases else 0

    @property
    def leaves_per_tree(self) -> List[int]:
        return [tree.n_leaves for tree in self.trees]

    def summed_beta(self, x: np.ndarray) -> LeafSplineModel:
        """Sum of the leaf coefficients x reaches across all trees."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise InvalidArgumentError(f"expected {self.p} static features, got {x.size}")
        total = np.zeros((self.n_basis, self.q))
        for tree in self.trees:
            total += tree.leaf_for(x).value.beta
        return LeafSplineModel(total)


def _design_tensor(dataset: Dataset, bases: Sequence[SplineBasis]) -> np.ndarray:
    points = dataset.grid.points
    return np.stack([integrated_features(bases, ind.z, points) for ind in dataset.individuals])


def _grow_dynamic_tree(X: np.ndarray, A_ind: np.ndarray, b_ind: np.ndarray, groups: Sequence[np.ndarray],
                       config: BoostConfig) -> Tuple[Tree, List[GroupLassoResult]]:
    """Grow one tree by gain G2; returns the tree and the fit of every leaf."""
    solutions: Dict[bytes, GroupLassoResult] = {}
    dim = A_ind.shape[1]

    def fit(Q: NodeQuadratic, warm: Optional[np.ndarray]) -> GroupLassoResult:
        return group_lasso_fit(Q, config.gamma2, groups, beta0=warm)

    def node_fit(rows: np.ndarray, warm: Optional[np.ndarray] = None) -> GroupLassoResult:
        key = np.sort(rows).tobytes()
        if key not in solutions:
            solutions[key] = fit(NodeQuadratic(A_ind[rows].sum(axis=0), b_ind[rows].sum(axis=0)), warm)
        return solutions[key]

    def find_split(rows: np.ndarray):
        A_node, b_node = A_ind[rows], b_ind[rows]
        total = NodeQuadratic(A_node.sum(axis=0), b_node.sum(axis=0))
        parent = node_fit(rows)
        parent_f2 = f2_value(total, parent.beta)
        children = {}

        def gains(feature, order, positions):
            cum_A = np.cumsum(A_node[order], axis=0)
            cum_b = np.cumsum(b_node[order], axis=0)
            out = np.empty(positions.size)
            for c, k in enumerate(positions):
                left_Q = NodeQuadratic(cum_A[k - 1], cum_b[k - 1])
                right_Q = total - left_Q
                left = fit(left_Q, parent.beta)
                right = fit(right_Q, parent.beta)
                out[c] = parent_f2 - f2_value(left_Q, left.beta) - f2_value(right_Q, right.beta) - 2.0 * config.gamma1
                children[(feature, int(k))] = (rows[order[:k]], left, rows[order[k:]], right)
            return out

        split = search_splits(X[rows], gains, config.min_leaf, config.max_thresholds, config.n_jobs)
        if split is not None:
            rule, _ = split
            values = X[rows, rule.feature]
            k = int(np.sum(values <= rule.threshold))
            left_rows, left, right_rows, right = children[(rule.feature, k)]
            solutions[np.sort(left_rows).tobytes()] = left
            solutions[np.sort(right_rows).tobytes()] = right
        return split

    root, leaf_rows = grow_levelwise(
        X.shape[0], config.d_max, find_split,
        lambda rule, rows: rule.goes_left(X[rows]),
    )
    tree = Tree(root)
    results = [node_fit(rows) if rows.size else fit(NodeQuadratic.zeros(dim), None) for rows in leaf_rows]
    return tree, results


def fit_dynamic(dataset: Dataset, config: BoostConfig, u: int, v: int,
                progress: bool = False) -> EnsembleDynamic:
    """
    Stagewise boosting with spline leaves fitted by group lasso.

    Args:
        dataset: Training data with q >= 1 dynamic features
        config: Boosting configuration; gamma2 is the group penalty
        u: Internal knots per basis
        v: Order parameter per basis (degree v - 1)
        progress: Show a progress bar

    Returns:
        Fitted EnsembleDynamic
    """
    if dataset.q < 1:
        raise InvalidArgumentError("dynamic boosting needs at least one dynamic feature")
    grid = dataset.grid
    X = dataset.X
    bases = build_bases(dataset, u, v)
    n_basis = bases[0].n_basis
    groups = contiguous_groups(dataset.q, n_basis)

    phi = _design_tensor(dataset, bases)
    weights = dataset.weight_matrix
    A_ind = np.einsum('imd,im,ime->ide', phi, weights, phi)
    mu_tilde = dataset.mcf_matrix
    mu_hat = np.zeros_like(mu_tilde)

    ensemble = EnsembleDynamic(grid, config, bases, dataset.p,
                               feature_ranges=np.column_stack([X.min(axis=0), X.max(axis=0)]))
    ensemble.training_loss.append(half_squared_distance(mu_tilde, mu_hat, weights))
    logger.info("Boosting %d spline-leaf trees on %d individuals (p=%d, q=%d, %d bases)",
                config.K, dataset.n, dataset.p, dataset.q, n_basis)

    for k in tqdm(range(config.K), desc='trees', disable=not progress):
        b_ind = np.einsum('imd,im->id', phi, weights * (mu_hat - mu_tilde))
        tree, results = _grow_dynamic_tree(X, A_ind, b_ind, groups, config)
        for leaf, result in zip(tree.leaves, results):
            leaf.value = LeafSplineModel.from_flat(result.beta, n_basis, dataset.q, result, config.learning_rate)
        leaf_index = tree.apply(X)
        flat = np.vstack([leaf.value.flat for leaf in tree.leaves])[leaf_index]
        mu_hat += np.einsum('imd,id->im', phi, flat)
        for node in tree.internal_nodes():
            ensemble.importance_raw[node.rule.feature] += node.gain
        ensemble.trees.append(tree)
        ensemble.training_loss.append(half_squared_distance(mu_tilde, mu_hat, weights))
        unconverged = sum(not r.converged for r in results)
        logger.info("Tree %d: %d leaves, training loss %.6g%s", k + 1, tree.n_leaves, ensemble.training_loss[-1],
                    f", {unconverged} leaf fit(s) not converged" if unconverged else "")
    return ensemble


def predict_dynamic_at(ensemble: EnsembleDynamic, x, z_series: Sequence[DynamicSeries], times) -> np.ndarray:
    """Predicted cumulative intensity at arbitrary times, including beyond the grid."""
    if len(z_series) != ensemble.q:
        raise InvalidArgumentError(f"missing dynamic series: got {len(z_series)}, expected {ensemble.q}")
    beta = ensemble.summed_beta(x)
    if not ensemble.trees:
        return np.zeros(np.size(times))
    phi = integrated_features(ensemble.bases, z_series, np.atleast_1d(np.asarray(times, dtype=float)))
    return phi @ beta.flat


def predict_dynamic(ensemble: EnsembleDynamic, x, z_series: Sequence[DynamicSeries],
                    clamp: bool = False) -> Curve:
    """Predicted cumulative intensity on the training grid."""
    curve = Curve(ensemble.grid, predict_dynamic_at(ensemble, x, z_series, ensemble.grid.points))
    return curve.clamped() if clamp else curve


def beta_by_region_export(ensemble: EnsembleDynamic, resolution: int = 20) -> pd.DataFrame:
    """
    Summed leaf coefficients over a regular grid of the 2-D static feature plane.

    Cells are centred on a resolution x resolution grid spanning the training
    feature ranges; each cell reports the sum of the beta matrices its centre
    reaches in every tree.

    Returns:
        Table with columns x1, x2, feature, basis, beta (feature and basis are
        1-based); empty for an ensemble without trees
    """
    columns = ['x1', 'x2', 'feature', 'basis', 'beta']
    if ensemble.p != 2:
        raise UnsupportedOperationError(f"the beta map needs exactly 2 static features, got {ensemble.p}")
    if not ensemble.trees:
        return pd.DataFrame(columns=columns)
    ranges = ensemble.feature_ranges if ensemble.feature_ranges is not None else np.array([[0.0, 1.0], [0.0, 1.0]])
    centres = [lo + (np.arange(resolution) + 0.5) * (hi - lo) / resolution for lo, hi in ranges]

    rows = []
    for x1 in centres[0]:
        for x2 in centres[1]:
            beta = ensemble.summed_beta(np.array([x1, x2])).beta
            for l in range(ensemble.q):
                for b in range(ensemble.n_basis):
                    rows.append({'x1': x1, 'x2': x2, 'feature': l + 1, 'basis': b + 1, 'beta': beta[b, l]})
    return pd.DataFrame(rows, columns=columns)
