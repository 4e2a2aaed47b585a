"""
Tests for curve-leaf boosting with static features.
"""

import itertools

import numpy as np
import pytest
from scipy.optimize import brentq

from src.core.boost_static import (BoostConfig, EnsembleStatic, find_best_split, feature_importance, fit_static,
                                   gradients, grow_tree, leaf_values, loss, node_score, node_scores, optimal_leaf,
                                   predict_static, risk_weights, split_gain_G1)
from src.core.data import Curve, build_grid
from src.core.errors import InvalidArgumentError
from src.core.trees import Node, SplitRule, Tree


def _objective(G, H, f, gamma2, weights):
    """Discretised node objective for a given leaf curve."""
    return float(np.sum(weights * (G * f + 0.5 * (H + gamma2) * f ** 2)))


class TestBoostConfig:
    @pytest.mark.parametrize('kwargs', [{'K': 0}, {'gamma1': -1}, {'d_max': 1}, {'min_leaf': 0},
                                        {'learning_rate': 0}, {'learning_rate': 1.5}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            BoostConfig(**kwargs)

    def test_dict_round_trip(self):
        config = BoostConfig(K=7, gamma1=3.0, n_jobs=2)
        assert BoostConfig.from_dict(config.to_dict()) == config


class TestGradients:
    def test_perfect_fit(self, grid4):
        mu = Curve(grid4, [1.0, 2.0, 2.0, 3.0], [True, True, True, False])
        g, h = gradients(mu, mu)
        np.testing.assert_array_equal(g.values, 0.0)
        np.testing.assert_array_equal(h.values, [1, 1, 1, 0])

    def test_zero_initialisation(self, grid4):
        mu = Curve(grid4, [1.0, 2.0, 2.0, 3.0])
        g, _ = gradients(mu, Curve.zeros(grid4))
        np.testing.assert_array_equal(g.values, -mu.values)

    def test_matches_finite_difference(self, rng):
        grid = build_grid(3, 12)
        mu_tilde = Curve(grid, np.cumsum(rng.uniform(size=12)))
        mu_hat = Curve(grid, rng.normal(size=12))
        g, _ = gradients(mu_tilde, mu_hat)
        eps = 1e-6
        weights = grid.weights()
        for j in range(grid.m):
            bump = np.zeros(grid.m)
            bump[j] = eps
            up = loss(mu_tilde, Curve(grid, mu_hat.values + bump))
            down = loss(mu_tilde, Curve(grid, mu_hat.values - bump))
            assert (up - down) / (2 * eps) / weights[j] == pytest.approx(g.values[j], abs=1e-6)


class TestLeafAndScore:
    def test_zero_gradient_gives_zero_leaf(self, grid4):
        f = optimal_leaf(Curve.zeros(grid4), Curve.constant(grid4, 3.0), 1.0)
        np.testing.assert_array_equal(f.values, 0.0)

    def test_pointwise_arithmetic(self, grid4):
        f = optimal_leaf(Curve.constant(grid4, 2.0), Curve.constant(grid4, 1.0), 1.0)
        np.testing.assert_allclose(f.values, -1.0)

    def test_zero_denominator(self, grid4):
        f = optimal_leaf(Curve.constant(grid4, 2.0), Curve.zeros(grid4), 0.0)
        np.testing.assert_array_equal(f.values, 0.0)

    def test_leaf_minimises_node_objective(self, rng):
        grid = build_grid(1, 8)
        G, H, gamma2 = rng.normal(size=8), rng.uniform(1, 3, size=8), 0.7
        f = optimal_leaf(Curve(grid, G), Curve(grid, H), gamma2).values
        weights = grid.weights()
        best = _objective(G, H, f, gamma2, weights)
        for j in range(grid.m):
            for step in (-1e-3, 1e-3):
                moved = f.copy()
                moved[j] += step
                assert _objective(G, H, moved, gamma2, weights) > best

    def test_node_score_of_zero_gradient(self, grid4):
        assert node_score(Curve.zeros(grid4), Curve.constant(grid4, 2.0), 1.0) == 0.0

    def test_node_score_arithmetic(self):
        grid = build_grid(1, 2)
        assert node_score(Curve.constant(grid, 2.0), Curve.constant(grid, 1.0), 1.0) == pytest.approx(-1.0)

    def test_node_score_equals_objective_at_optimum(self, rng):
        grid = build_grid(2, 10)
        G, H, gamma2 = rng.normal(size=10), rng.uniform(0.5, 2, size=10), 0.3
        f = optimal_leaf(Curve(grid, G), Curve(grid, H), gamma2).values
        expected = _objective(G, H, f, gamma2, grid.weights())
        assert node_score(Curve(grid, G), Curve(grid, H), gamma2) == pytest.approx(expected, abs=1e-10)


class TestSplitGain:
    def test_degenerate_split_costs_gamma1(self):
        assert split_gain_G1(-3.0, -3.0, 0.0, 2.5) == pytest.approx(-2.5)

    def test_non_negative_without_penalty(self, rng):
        weights = build_grid(1, 6).weights()
        G, H = rng.normal(size=(10, 6)), rng.uniform(0.5, 1.5, size=(10, 6))
        parent = node_scores(G.sum(axis=0), H.sum(axis=0), 0.5, weights)
        for _ in range(50):
            left = rng.uniform(size=10) < 0.5
            gain = split_gain_G1(parent,
                                 node_scores(G[left].sum(axis=0), H[left].sum(axis=0), 0.5, weights),
                                 node_scores(G[~left].sum(axis=0), H[~left].sum(axis=0), 0.5, weights), 0.0)
            assert gain >= -1e-12


class TestFindBestSplit:
    @pytest.fixture
    def clustered(self, rng):
        n, m = 40, 5
        X = np.column_stack([np.linspace(0.0125, 0.9875, n), rng.uniform(size=n)])
        G = np.where(X[:, [0]] <= 0.5, 1.0, -1.0) * np.ones((n, m))
        H = np.ones((n, m))
        return X, G, H, build_grid(1, m).weights()

    def test_recovers_planted_threshold(self, clustered):
        X, G, H, weights = clustered
        rule, gain = find_best_split(np.arange(40), X, G, H, weights,
                                     BoostConfig(min_leaf=1, max_thresholds=1000))
        assert rule.feature == 0
        assert rule.threshold == pytest.approx(0.5)
        assert gain > 0

    def test_matches_brute_force(self, clustered):
        X, G, H, weights = clustered
        config = BoostConfig(gamma1=0.1, gamma2=0.5, min_leaf=3, max_thresholds=1000)
        rule, gain = find_best_split(np.arange(40), X, G, H, weights, config)

        parent = node_scores(G.sum(axis=0), H.sum(axis=0), config.gamma2, weights)
        best = -np.inf
        for feature in range(X.shape[1]):
            for threshold in np.unique(X[:, feature]):
                left = X[:, feature] <= threshold
                if left.sum() < 3 or (~left).sum() < 3:
                    continue
                left_score = node_scores(G[left].sum(axis=0), H[left].sum(axis=0), config.gamma2, weights)
                right_score = node_scores(G[~left].sum(axis=0), H[~left].sum(axis=0), config.gamma2, weights)
                best = max(best, split_gain_G1(parent, left_score, right_score, config.gamma1))
        assert gain == pytest.approx(best, abs=1e-10)

    def test_identical_features(self):
        X = np.ones((12, 2))
        G = np.vstack([np.ones((6, 3)), -np.ones((6, 3))])
        assert find_best_split(np.arange(12), X, G, np.ones((12, 3)), np.ones(3), BoostConfig(min_leaf=1)) is None

    def test_penalty_dominates(self, clustered):
        X, G, H, weights = clustered
        assert find_best_split(np.arange(40), X, G, H, weights, BoostConfig(gamma1=1e9, min_leaf=1)) is None

    def test_min_leaf_respected(self, clustered):
        X, G, H, weights = clustered
        rule, _ = find_best_split(np.arange(40), X, G, H, weights, BoostConfig(min_leaf=15, max_thresholds=1000))
        left = rule.goes_left(X)
        assert left.sum() >= 15 and (~left).sum() >= 15


class TestGrowTree:
    def test_huge_penalty_gives_shrunken_mean(self, rng):
        grid = build_grid(1, 4)
        X = rng.uniform(size=(20, 2))
        G, H = rng.normal(size=(20, 4)), np.ones((20, 4))
        config = BoostConfig(gamma1=1e9, gamma2=5.0, learning_rate=0.5)
        tree = grow_tree(X, G, H, grid, config)
        assert tree.n_leaves == 1
        np.testing.assert_allclose(tree.leaves[0].value.values, -0.5 * G.sum(axis=0) / (20 + 5.0))

    def test_leaf_cap_checked_per_level(self, rng):
        grid = build_grid(1, 3)
        X = rng.uniform(size=(200, 3))
        G = rng.normal(size=(200, 3)) + 5 * np.sign(X[:, [0]] - 0.5) + 3 * np.sign(X[:, [1]] - 0.5)
        tree = grow_tree(X, G, np.ones((200, 3)), grid, BoostConfig(d_max=3, min_leaf=5))
        # the cap is only checked before a level, so one level of two splits may overshoot
        assert tree.n_leaves <= 4

    def test_identical_across_thread_counts(self, small_a):
        ratio = risk_weights(small_a)
        G = -ratio * small_a.mcf_matrix
        trees = [grow_tree(small_a.X, G, ratio, small_a.grid, BoostConfig(gamma1=1.0, n_jobs=n_jobs))
                 for n_jobs in (1, 3)]
        rules = [[node.rule for node in tree.internal_nodes()] for tree in trees]
        assert rules[0] == rules[1]
        for a, b in zip(trees[0].leaves, trees[1].leaves):
            np.testing.assert_array_equal(a.value.values, b.value.values)


class TestFitAndPredict:
    def test_single_tree_shared_mean(self, small_a):
        ensemble = fit_static(small_a, BoostConfig(K=1, gamma1=1e9, gamma2=10.0))
        predictions = ensemble.predict_matrix(small_a.X)
        np.testing.assert_array_equal(predictions, np.broadcast_to(predictions[0], predictions.shape))
        assert predictions[0].max() > 0

    def test_training_loss_non_increasing(self, small_a):
        ensemble = fit_static(small_a, BoostConfig(K=6, gamma1=5.0, gamma2=2.0))
        assert len(ensemble.training_loss) == 7
        assert np.all(np.diff(ensemble.training_loss) <= 1e-9)

    def test_importance_accumulates_split_gains(self, small_a):
        ensemble = fit_static(small_a, BoostConfig(K=3, gamma1=1.0, gamma2=1.0))
        expected = np.zeros(small_a.p)
        for tree in ensemble.trees:
            for node in tree.internal_nodes():
                expected[node.rule.feature] += node.gain
        np.testing.assert_allclose(ensemble.importance_raw, expected)

    def test_zero_tree_prediction(self, grid4):
        ensemble = EnsembleStatic(grid4, BoostConfig(), p=2)
        np.testing.assert_array_equal(predict_static(ensemble, [0.3, 0.4]).values, 0.0)

    def test_one_leaf_tree_returns_its_curve(self, grid4):
        leaf_curve = Curve(grid4, [0.5, 1.0, -0.5, 2.0])
        ensemble = EnsembleStatic(grid4, BoostConfig(), p=2, trees=[Tree(Node(value=leaf_curve))])
        np.testing.assert_array_equal(predict_static(ensemble, [0.3, 0.4]).values, leaf_curve.values)
        np.testing.assert_array_equal(predict_static(ensemble, [0.3, 0.4], clamp=True).values, [0.5, 1.0, 0.0, 2.0])

    def test_routes_by_rule(self, grid4):
        low, high = Curve.constant(grid4, 1.0), Curve.constant(grid4, 3.0)
        root = Node(rule=SplitRule(1, 0.5), left=Node(value=low), right=Node(value=high), gain=1.0)
        ensemble = EnsembleStatic(grid4, BoostConfig(), p=2, trees=[Tree(root)] * 2)
        np.testing.assert_array_equal(predict_static(ensemble, [0.9, 0.5]).values, 2.0)
        np.testing.assert_array_equal(predict_static(ensemble, [0.1, 0.6]).values, 6.0)

    def test_contribution_trace(self, grid4):
        one = Curve.constant(grid4, 1.0)
        ensemble = EnsembleStatic(grid4, BoostConfig(), p=1, trees=[Tree(Node(value=one))] * 3)
        trace = ensemble.contribution_trace(np.array([0.0]))
        np.testing.assert_array_equal(trace[:, 0], [0, 1, 2, 3])

    def test_rejects_wrong_dimension(self, grid4):
        with pytest.raises(InvalidArgumentError):
            predict_static(EnsembleStatic(grid4, BoostConfig(), p=2), [0.1, 0.2, 0.3])


class TestFeatureImportance:
    def test_hand_built_gains(self, grid4):
        ensemble = EnsembleStatic(grid4, BoostConfig(), p=3, trees=[Tree(Node(value=Curve.zeros(grid4)))] * 2,
                                  importance_raw=np.array([8.0, 0.0, 2.0]))
        np.testing.assert_allclose(feature_importance(ensemble), [2.0, 0.0, 0.5])
        np.testing.assert_allclose(feature_importance(ensemble, standardize=True), [1.0, 0.0, 0.25])

    def test_unused_features_are_zero(self, small_a):
        ensemble = fit_static(small_a, BoostConfig(K=2, gamma1=1e9))
        np.testing.assert_array_equal(feature_importance(ensemble), 0.0)
        np.testing.assert_array_equal(feature_importance(ensemble, standardize=True), 0.0)

    def test_empty_ensemble(self, grid4):
        np.testing.assert_array_equal(feature_importance(EnsembleStatic(grid4, BoostConfig(), p=2)), [0.0, 0.0])


def test_exhaustive_partition_never_beats_best_split():
    """Every threshold split is a partition, so the best split cannot exceed the best partition."""
    rng = np.random.default_rng(7)
    X = rng.uniform(size=(8, 1))
    G, H = rng.normal(size=(8, 3)), np.ones((8, 3))
    weights = build_grid(1, 3).weights()
    rule, gain = find_best_split(np.arange(8), X, G, H, weights, BoostConfig(min_leaf=1, max_thresholds=100))
    parent = node_scores(G.sum(axis=0), H.sum(axis=0), 0.0, weights)
    best_partition = max(
        split_gain_G1(parent, node_scores(G[list(c)].sum(axis=0), H[list(c)].sum(axis=0), 0.0, weights),
                      node_scores(np.delete(G, list(c), 0).sum(axis=0), np.delete(H, list(c), 0).sum(axis=0),
                                  0.0, weights), 0.0)
        for size in range(1, 8) for c in itertools.combinations(range(8), size)
    )
    assert gain <= best_partition + 1e-12


class TestSplitInvariants:
    @staticmethod
    def _brute_force(X, G, H, weights, gamma1, gamma2, min_leaf):
        """Best (feature, threshold, gain) over every midpoint, first in (feature, threshold) order on ties."""
        parent = node_scores(G.sum(axis=0), H.sum(axis=0), gamma2, weights)
        best = None
        for feature in range(X.shape[1]):
            values = np.unique(X[:, feature])
            for threshold in 0.5 * (values[:-1] + values[1:]):
                left = X[:, feature] <= threshold
                if left.sum() < min_leaf or (~left).sum() < min_leaf:
                    continue
                gain = split_gain_G1(parent,
                                     node_scores(G[left].sum(axis=0), H[left].sum(axis=0), gamma2, weights),
                                     node_scores(G[~left].sum(axis=0), H[~left].sum(axis=0), gamma2, weights),
                                     gamma1)
                if best is None or gain > best[2]:
                    best = (feature, threshold, gain)
        return best if best is not None and best[2] > 0 else None

    def test_matches_brute_force_on_random_nodes(self):
        rng = np.random.default_rng(5)
        weights = build_grid(2, 6).weights()
        X = rng.uniform(size=(60, 3))
        G, H = rng.normal(size=(60, 6)), rng.uniform(0.2, 1.0, size=(60, 6))
        for _ in range(20):
            rows = np.sort(rng.choice(60, size=int(rng.integers(8, 40)), replace=False))
            min_leaf = int(rng.integers(1, 4))
            config = BoostConfig(gamma1=0.01, gamma2=0.5, min_leaf=min_leaf, max_thresholds=1000)
            found = find_best_split(rows, X, G, H, weights, config)
            expected = self._brute_force(X[rows], G[rows], H[rows], weights, 0.01, 0.5, min_leaf)
            if expected is None:
                assert found is None
                continue
            rule, gain = found
            assert rule.feature == expected[0]
            assert rule.threshold == pytest.approx(expected[1], abs=1e-12)
            assert gain == pytest.approx(expected[2], rel=1e-9, abs=1e-12)

    def test_gain_recomputed_from_stored_children(self, rng):
        grid = build_grid(3, 5)
        weights = grid.weights()
        X = rng.uniform(size=(50, 2))
        G = rng.normal(size=(50, 5)) + 2.0 * np.sign(X[:, [0]] - 0.4)
        H = rng.uniform(0.5, 1.5, size=(50, 5))
        gamma1, gamma2 = 0.2, 0.8
        tree = grow_tree(X, G, H, grid, BoostConfig(gamma1=gamma1, gamma2=gamma2, d_max=2, min_leaf=2))
        assert tree.n_leaves == 2
        members = tree.apply(X)
        scores = []
        for k, leaf in enumerate(tree.leaves):
            f = leaf.value.values
            H_leaf = H[members == k].sum(axis=0)
            scores.append(-0.5 * float(np.sum(weights * (H_leaf + gamma2) * f ** 2)))
        parent = node_scores(G.sum(axis=0), H.sum(axis=0), gamma2, weights)
        assert split_gain_G1(parent, scores[0], scores[1], gamma1) == pytest.approx(tree.root.gain, rel=1e-10)

    @pytest.mark.parametrize('factor', [0.01, 3.0, 250.0])
    def test_argmax_invariant_to_residual_scale(self, rng, factor):
        weights = build_grid(1, 4).weights()
        X = rng.uniform(size=(30, 3))
        G, H = rng.normal(size=(30, 4)), rng.uniform(0.5, 1.5, size=(30, 4))
        config = BoostConfig(gamma1=0.0, gamma2=0.0, min_leaf=1, max_thresholds=1000)
        rule, gain = find_best_split(np.arange(30), X, G, H, weights, config)
        scaled_rule, scaled_gain = find_best_split(np.arange(30), X, factor * G, H, weights, config)
        assert scaled_rule == rule
        assert scaled_gain == pytest.approx(factor ** 2 * gain, rel=1e-9)

    def test_leaf_norm_shrinks_with_gamma2(self, rng):
        G, H = rng.normal(size=10), rng.uniform(0, 2, size=10)
        norms = [np.linalg.norm(leaf_values(G, H, gamma2)) for gamma2 in (0.0, 0.1, 1.0, 10.0, 1e3, 1e6)]
        assert np.all(np.diff(norms) < 0)

    def test_ties_go_to_lowest_threshold(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        G = np.array([[1.0], [-1.0], [-1.0], [1.0]])
        rule, _ = find_best_split(np.arange(4), X, G, np.ones((4, 1)), np.ones(1),
                                  BoostConfig(gamma1=0.0, gamma2=0.0, min_leaf=1))
        assert rule == SplitRule(0, 1.5)

    def test_ties_go_to_lowest_feature(self):
        column = np.array([1.0, 2.0, 3.0, 4.0])
        X = np.column_stack([column[::-1], column, column])
        G = np.array([[-1.0], [-1.0], [1.0], [1.0]])
        rule, _ = find_best_split(np.arange(4), X, G, np.ones((4, 1)), np.ones(1),
                                  BoostConfig(gamma1=0.0, gamma2=0.0, min_leaf=1, n_jobs=3))
        assert rule == SplitRule(0, 2.5)


def test_leaf_matches_numerical_minimiser_on_random_nodes():
    rng = np.random.default_rng(12)
    for _ in range(20):
        m = int(rng.integers(2, 21))
        grid = build_grid(rng.uniform(1, 50), m)
        weights = grid.weights()
        n = int(rng.integers(1, 11))
        G, H = rng.normal(size=(n, m)).sum(axis=0), rng.uniform(0, 1, size=(n, m)).sum(axis=0)
        gamma2 = rng.uniform(0, 2)
        f = optimal_leaf(Curve(grid, G), Curve(grid, H), gamma2).values
        for j in range(m):
            def slope(v, j=j):
                # derivative of w (G v + 1/2 (H + gamma2) v^2) at grid point j
                return weights[j] * (G[j] + (H[j] + gamma2) * v)

            bound = abs(G[j]) / (H[j] + gamma2) + 1.0
            assert f[j] == pytest.approx(brentq(slope, -bound, bound, xtol=1e-14), abs=1e-8)
        assert node_score(Curve(grid, G), Curve(grid, H), gamma2) == pytest.approx(
            _objective(G, H, f, gamma2, weights), abs=1e-10)
