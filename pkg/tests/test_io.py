"""
Tests for dataset CSV loading, saving and curve export.
"""

import numpy as np
import pandas as pd
import pytest

from src.core.data import Curve, EventHistory, build_grid, empirical_mcf
from src.core.errors import DataFormatError
from src.core.io import load_dataset, load_dataset_dir, save_curves, save_dataset


def _write(path, text):
    path.write_text(text)
    return str(path)


class TestRoundTrip:
    def test_static_dataset(self, toy_dataset, tmp_path):
        save_dataset(toy_dataset, tmp_path)
        loaded = load_dataset_dir(tmp_path, m=4, t_max=100.0)
        assert loaded.n == 3
        assert loaded.q == 0
        for original, restored in zip(toy_dataset.individuals, loaded.individuals):
            assert original == restored

    def test_dynamic_dataset(self, toy_dynamic_dataset, tmp_path):
        paths = save_dataset(toy_dynamic_dataset, tmp_path)
        assert 'dynamic' in paths
        loaded = load_dataset_dir(tmp_path, m=10)
        assert loaded.q == 1
        assert loaded.grid == toy_dynamic_dataset.grid
        for original, restored in zip(toy_dynamic_dataset.individuals, loaded.individuals):
            assert original == restored

    def test_simulated_floats_survive_exactly(self, small_a, tmp_path):
        save_dataset(small_a, tmp_path)
        loaded = load_dataset_dir(tmp_path, m=small_a.grid.m, t_max=small_a.grid.t_max)
        np.testing.assert_array_equal(loaded.X, small_a.X)
        for original, restored in zip(small_a.individuals, loaded.individuals):
            np.testing.assert_array_equal(original.events.times, restored.events.times)

    def test_t_max_defaults_to_largest_censor(self, toy_dataset, tmp_path):
        save_dataset(toy_dataset, tmp_path)
        assert load_dataset_dir(tmp_path, m=4).grid.t_max == 100.0


class TestValidation:
    def test_event_after_censor_names_row(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,150,event\n1,120,censor\n")
        static = _write(tmp_path / 'static.csv', "id,x1\n1,0.5\n")
        with pytest.raises(DataFormatError) as excinfo:
            load_dataset(events, static)
        assert excinfo.value.row == 0
        assert 'row 0' in str(excinfo.value)

    def test_unsorted_event_times(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,5,event\n1,3,event\n1,10,censor\n")
        static = _write(tmp_path / 'static.csv', "id,x1\n1,0.5\n")
        with pytest.raises(DataFormatError) as excinfo:
            load_dataset(events, static)
        assert excinfo.value.row == 1

    def test_missing_censor_row(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,5,event\n")
        static = _write(tmp_path / 'static.csv', "id,x1\n1,0.5\n")
        with pytest.raises(DataFormatError, match='no censor row'):
            load_dataset(events, static)

    def test_unknown_kind(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,5,failure\n1,10,censor\n")
        static = _write(tmp_path / 'static.csv', "id,x1\n1,0.5\n")
        with pytest.raises(DataFormatError, match='kind'):
            load_dataset(events, static)

    def test_static_columns_must_be_numbered(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,10,censor\n")
        static = _write(tmp_path / 'static.csv', "id,age\n1,0.5\n")
        with pytest.raises(DataFormatError, match='header'):
            load_dataset(events, static)

    def test_missing_dynamic_feature(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,10,censor\n2,10,censor\n")
        static = _write(tmp_path / 'static.csv', "id,x1\n1,0.1\n2,0.2\n")
        dynamic = _write(tmp_path / 'dynamic.csv', "id,feature,time,value\n1,1,0,0.5\n")
        with pytest.raises(DataFormatError, match='dynamic feature 1'):
            load_dataset(events, static, dynamic)

    def test_dynamic_series_must_start_at_origin(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,10,censor\n2,10,censor\n")
        static = _write(tmp_path / 'static.csv', "id,x1\n1,0.1\n2,0.2\n")
        dynamic = _write(tmp_path / 'dynamic.csv', "id,feature,time,value\n1,1,0,0.5\n2,1,2,0.4\n2,1,6,0.7\n")
        with pytest.raises(DataFormatError, match='row 1: .*must start at 0') as excinfo:
            load_dataset(events, static, dynamic)
        assert excinfo.value.row == 1

    def test_last_sample_before_censoring_is_held(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,10,censor\n")
        static = _write(tmp_path / 'static.csv', "id,x1\n1,0.1\n")
        dynamic = _write(tmp_path / 'dynamic.csv', "id,feature,time,value\n1,1,0,0.5\n1,1,4,0.9\n")
        dataset = load_dataset(events, static, dynamic, m=5)
        assert dataset.individuals[0].z[0].value_at(10.0) == 0.9

    def test_dynamic_file_omitted(self, tmp_path):
        events = _write(tmp_path / 'events.csv', "id,time,kind\n1,2,event\n1,10,censor\n")
        static = _write(tmp_path / 'static.csv', "id,x1,x2\n1,0.1,0.2\n")
        dataset = load_dataset(events, static, m=5)
        assert dataset.q == 0
        assert dataset.p == 2


class TestSaveCurves:
    def test_header_and_masked_flag(self, grid4, tmp_path):
        curves = {'7': empirical_mcf(EventHistory([30.0], 50.0), grid4)}
        path = save_curves(curves, tmp_path / 'curves.csv')
        df = pd.read_csv(path, dtype={'id': str})
        assert list(df.columns) == ['id', 't', 'value', 'masked']
        assert df['masked'].tolist() == [False, False, True, True]
        assert df['value'].tolist() == [0.0, 1.0, 1.0, 1.0]

    def test_empty(self, tmp_path):
        df = pd.read_csv(save_curves({}, tmp_path / 'curves.csv'))
        assert list(df.columns) == ['id', 't', 'value', 'masked']
        assert df.empty

    def test_values_exact(self, tmp_path):
        grid = build_grid(3, 3)
        curve = Curve(grid, [0.1, 1 / 3, 2 ** 0.5])
        df = pd.read_csv(save_curves({'a': curve}, tmp_path / 'c.csv'), float_precision='round_trip')
        np.testing.assert_array_equal(df['value'].to_numpy(), curve.values)
