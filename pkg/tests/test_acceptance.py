"""
Full-size runs on the benchmark datasets.

These train the reference configurations end to end and take minutes;
deselect them with -m "not slow".
"""

import json
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from src.core.boost_static import BoostConfig, feature_importance, fit_static
from src.data.dataset_specs import get_static_data
from src.data.simulate import gen_dataset_A, gen_morvita, generate, rate_A, true_cumulative_intensity
from src.evaluation.validation import compare_extrapolation, cross_validate
from src.export.csv_exporter import surface_table
from src.export.model_store import model_to_dict

pytestmark = pytest.mark.slow


def reference_config(name: str, **changes) -> BoostConfig:
    return replace(BoostConfig(), **get_static_data()[1][name], **changes)


@pytest.fixture(scope='module')
def dataset_a():
    return gen_dataset_A(n=200, seed=0)


@pytest.fixture(scope='module')
def model_a(dataset_a):
    return fit_static(dataset_a, reference_config('A'))


def test_region_rates_recovered(dataset_a, model_a):
    predictions = model_a.predict_matrix(dataset_a.X)[:, -1] / dataset_a.grid.t_max
    true_rates = np.array([rate_A(x) for x in dataset_a.X])
    means = {rate: predictions[true_rates == rate].mean() for rate in (0.01, 0.05, 0.10)}
    assert means[0.01] < means[0.05] < means[0.10]
    for rate, mean in means.items():
        assert abs(mean - rate) <= 0.4 * rate


def test_late_trees_stop_splitting(model_a):
    assert 1 in model_a.leaves_per_tree[29:50]


def test_thread_count_does_not_change_model(dataset_a, model_a):
    threaded = fit_static(dataset_a, reference_config('A', n_jobs=8))
    assert json.dumps(model_to_dict(threaded), sort_keys=True) == json.dumps(model_to_dict(model_a), sort_keys=True)


def test_redundant_features_have_low_importance():
    dataset = generate('B', seed=0)
    importance = feature_importance(fit_static(dataset, reference_config('B')), standardize=True)
    assert set(np.argsort(importance)[-2:]) == {0, 1}
    assert np.all(importance[2:] <= 0.2)


def test_concordance_ordering(dataset_a):
    report = cross_validate(dataset_a, ['boostr', 'mcf', 'mcf-knn', 'hpp'], reference_config('A'),
                            split=(150, 50), reps=50, seed=0, knn_k=20)
    boostr = report.mean('boostr')
    assert boostr >= report.mean('mcf') + 0.05
    assert boostr > report.mean('mcf-knn')
    assert boostr > report.mean('hpp')


@pytest.mark.parametrize('name, t_eval', [('C', 50.0), ('D', 100.0)])
def test_surface_rank_correlation(name, t_eval):
    dataset = generate(name, seed=0)
    ensemble = fit_static(dataset, reference_config(name))
    surface = surface_table(ensemble, t_eval=t_eval, resolution=20)
    points = surface[['x1', 'x2']].to_numpy()
    truth = [float(true_cumulative_intensity(name, x, t_eval)) for x in points]
    assert stats.spearmanr(surface['mu'], truth).correlation >= 0.8


def test_beats_pooled_mcf_on_random_effects_trial():
    dataset = gen_morvita(n=1000, sigma=0.0, seed=0)
    report = cross_validate(dataset, ['boostr', 'mcf'], reference_config('morvita'),
                            split=(500, 500), reps=10, seed=0)
    assert report.mean('boostr', 'l2') < report.mean('mcf', 'l2')


def test_extrapolation_contrast():
    train = gen_morvita(n=1000, seed=1, horizon=240.0, max_events=None)
    test = gen_morvita(n=200, seed=2, horizon=240.0, max_events=None)
    comparison = compare_extrapolation(train, test, reference_config('morvita'))
    booster = comparison[comparison['method'] == 'time-booster']
    assert np.array_equal(booster['pred_horizon'].to_numpy(), booster['pred_train'].to_numpy())
    boostr = comparison[comparison['method'] == 'boostr']
    rising = boostr['slope'] > 0
    assert rising.any()
    assert np.all(boostr.loc[rising, 'pred_horizon'] > boostr.loc[rising, 'pred_train'])
