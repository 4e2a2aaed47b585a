"""
Comparison predictors for cumulative intensity curves.

Pooled and nearest-neighbour mean cumulative functions, a homogeneous
Poisson model with log-linear rate and a booster that treats time as one
more feature.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from src.core.boost_static import BoostConfig, leaf_values
from src.core.data import Curve, Dataset, TimeGrid, id_sort_key
from src.core.errors import ConvergenceError, InvalidArgumentError
from src.core.trees import Tree, grow_levelwise, search_splits

logger = logging.getLogger(__name__)

NEWTON_MAX_ITER = 100
NEWTON_TOL = 1e-8
RIDGE = 1e-6
MIN_STEP = 1e-10
LOGLIK_SLACK = 1e-12


def _nelson_aalen(dataset: Dataset, rows: np.ndarray) -> Curve:
    censors = np.sort(dataset.censors[rows])
    events = np.sort(np.concatenate([dataset.individuals[i].events.times for i in rows]))
    at_risk = censors.size - np.searchsorted(censors, events, side='left')
    cumulative = np.cumsum(1.0 / at_risk)
    counts = np.searchsorted(events, dataset.grid.points, side='right')
    values = np.concatenate(([0.0], cumulative))[counts]
    return Curve(dataset.grid, values)


def pooled_mcf(train: Dataset) -> Curve:
    """
    Nelson-Aalen type mean cumulative function ignoring features.

    Each event at time s adds 1 / Y(s), where Y(s) counts individuals still
    under observation at s.
    """
    return _nelson_aalen(train, np.arange(train.n))


def mcf_knn(train: Dataset, x_query, K: int) -> Curve:
    """
    Mean cumulative function of the K training individuals nearest to x_query.

    Distances are Euclidean in the static feature space; ties go to the
    smaller id, compared numerically when ids are numbers.
    """
    if K < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {K}")
    if K > train.n:
        raise InvalidArgumentError(f"K={K} exceeds the {train.n} training individuals")
    x_query = np.asarray(x_query, dtype=float).reshape(1, -1)
    distances = cdist(x_query, train.X)[0]
    ids = train.ids
    rank = np.empty(train.n, dtype=int)
    rank[sorted(range(train.n), key=lambda i: id_sort_key(ids[i]))] = np.arange(train.n)
    order = np.lexsort((rank, distances))
    return _nelson_aalen(train, order[:K])


@dataclass
class HppLogLinear:
    """Fitted rate exp(beta0 + beta'x); a None coefficient vector means rate 0."""
    coefficients: Optional[np.ndarray]
    grid: TimeGrid
    iterations: int = 0
    gradient_norm: float = 0.0

    def rate(self, x) -> float:
        if self.coefficients is None:
            return 0.0
        x = np.asarray(x, dtype=float)
        return float(np.exp(self.coefficients[0] + x @ self.coefficients[1:]))

    def predict_at(self, x, times) -> np.ndarray:
        return self.rate(x) * np.asarray(times, dtype=float)

    def predict(self, x) -> Curve:
        return Curve(self.grid, self.predict_at(x, self.grid.points))

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.vstack([self.predict_at(x, self.grid.points) for x in np.atleast_2d(X)])


def _poisson_loglik(beta, Z, counts, exposure, ridge):
    eta = Z @ beta
    return float(counts @ eta - exposure @ np.exp(eta) - 0.5 * ridge * beta[1:] @ beta[1:])


def hpp_loglinear_fit(train: Dataset) -> HppLogLinear:
    """
    Poisson maximum likelihood for lambda_i = exp(beta0 + beta'x_i) with exposure c_i.

    Newton's method with step halving; a ridge of 1e-6 on the slopes is added
    when the design is rank deficient.

    Raises:
        ConvergenceError: when step halving cannot raise the log-likelihood, or the
            gradient norm is not below 1e-8 after 100 iterations
    """
    counts = np.array([ind.events.n_events for ind in train.individuals], dtype=float)
    exposure = train.censors
    if counts.sum() == 0:
        logger.warning("No events in the training data; the fitted rate is zero")
        return HppLogLinear(None, train.grid)

    Z = np.column_stack([np.ones(train.n), train.X])
    ridge = 0.0
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        logger.warning("Design matrix is rank deficient; adding a ridge of %g", RIDGE)
        ridge = RIDGE
    penalty = np.diag(np.r_[0.0, np.full(Z.shape[1] - 1, ridge)])

    beta = np.zeros(Z.shape[1])
    beta[0] = np.log(counts.sum() / exposure.sum())
    current = _poisson_loglik(beta, Z, counts, exposure, ridge)
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        mu = exposure * np.exp(Z @ beta)
        grad = Z.T @ (counts - mu) - penalty @ beta
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < NEWTON_TOL:
            return HppLogLinear(beta, train.grid, iteration - 1, grad_norm)
        hessian = Z.T @ (mu[:, None] * Z) + penalty
        step = np.linalg.solve(hessian, grad)
        scale = 1.0
        floor = current - LOGLIK_SLACK * max(1.0, abs(current))
        while True:
            candidate = beta + scale * step
            value = _poisson_loglik(candidate, Z, counts, exposure, ridge)
            if value >= floor:
                break
            scale *= 0.5
            if scale < MIN_STEP:
                raise ConvergenceError(f"step halving found no ascent at iteration {iteration} "
                                       f"(gradient norm {grad_norm:.3g})")
        beta, current = candidate, value
    raise ConvergenceError(f"log-linear Poisson fit did not converge in {NEWTON_MAX_ITER} iterations")


def _time_rows(dataset: Dataset):
    rows, cols = np.nonzero(dataset.mask_matrix)
    features = np.column_stack([dataset.X[rows], dataset.grid.points[cols]])
    return features, dataset.mcf_matrix[rows, cols]


@dataclass
class TimeFeatureBooster:
    """Squared-error boosted trees on rows (x, t) with scalar leaves."""
    grid: TimeGrid
    config: BoostConfig
    p: int
    trees: List[Tree] = field(default_factory=list)

    def predict_at(self, x, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        x = np.asarray(x, dtype=float)
        rows = np.column_stack([np.tile(x, (times.size, 1)), times])
        out = np.zeros(times.size)
        for tree in self.trees:
            out += np.array([leaf.value for leaf in tree.leaves])[tree.apply(rows)]
        return out

    def predict(self, x) -> Curve:
        return Curve(self.grid, self.predict_at(x, self.grid.points))

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.vstack([self.predict_at(x, self.grid.points) for x in np.atleast_2d(X)])


def time_feature_booster_fit(train: Dataset, config: BoostConfig) -> TimeFeatureBooster:
    """
    Boost constant-leaf trees with time appended as feature p + 1.

    Each observed grid point of each individual is one row with target the
    individual's empirical MCF there. Thresholds on time are midpoints of
    grid points, so predictions are constant after the last grid point.
    """
    features, target = _time_rows(train)
    model = TimeFeatureBooster(train.grid, config, train.p)
    prediction = np.zeros(target.size)
    hessian = np.ones(target.size)

    for k in range(config.K):
        grad = prediction - target

        def find_split(rows):
            g_node, h_node = grad[rows], hessian[rows]
            G, H = g_node.sum(), h_node.sum()

            def gains(feature, order, positions):
                GL = np.cumsum(g_node[order])[positions - 1]
                HL = np.cumsum(h_node[order])[positions - 1]
                parent = -0.5 * G ** 2 / (H + config.gamma2)
                left = -0.5 * GL ** 2 / (HL + config.gamma2)
                right = -0.5 * (G - GL) ** 2 / (H - HL + config.gamma2)
                return parent - left - right - config.gamma1

            return search_splits(features[rows], gains, config.min_leaf, config.max_thresholds, config.n_jobs)

        root, leaf_rows = grow_levelwise(target.size, config.d_max, find_split,
                                         lambda rule, rows: rule.goes_left(features[rows]))
        tree = Tree(root)
        for leaf, rows in zip(tree.leaves, leaf_rows):
            leaf.value = config.learning_rate * float(leaf_values(grad[rows].sum(), hessian[rows].sum(), config.gamma2))
            prediction[rows] += leaf.value
        model.trees.append(tree)
        logger.debug("Time-feature tree %d: %d leaves, mse %.6g", k + 1, tree.n_leaves,
                     float(np.mean((prediction - target) ** 2)))
    return model
