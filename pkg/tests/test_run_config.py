"""
Tests for run configuration resolution.
"""

from pathlib import Path

import pytest

from src.core.errors import InvalidArgumentError
from src.utils.run_config import DEFAULTS, RunConfig, read_config_file, resolve_config

TEMPLATE = Path(__file__).resolve().parents[1] / 'config' / 'boostr_template.cfg'


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('# boosting\nK = 7\n\nmin-leaf=3\nt_max = none\nmode = dynamic\nseed = 11\n')
    return path


class TestReadConfigFile:
    def test_dashes_and_comments(self, config_file):
        assert read_config_file(config_file) == {'K': '7', 'min_leaf': '3', 't_max': 'none',
                                                 'mode': 'dynamic', 'seed': '11'}

    def test_unknown_key(self, tmp_path):
        path = tmp_path / 'bad.cfg'
        path.write_text('trees = 5\n')
        with pytest.raises(InvalidArgumentError, match='line 1'):
            read_config_file(path)

    def test_line_without_value(self, tmp_path):
        path = tmp_path / 'bad.cfg'
        path.write_text('K = 5\nverbose\n')
        with pytest.raises(InvalidArgumentError, match='line 2'):
            read_config_file(path)

    def test_template_is_valid(self):
        config = resolve_config(TEMPLATE, environ={})
        assert config.gamma1 == 300.0
        assert config.t_max is None
        assert config.dataset == 'data/A'


class TestResolveConfig:
    def test_defaults(self):
        assert resolve_config(environ={}) == RunConfig()
        assert DEFAULTS['K'] == 50

    def test_file_values_are_typed(self, config_file):
        config = resolve_config(config_file, environ={})
        assert config.K == 7
        assert config.min_leaf == 3
        assert config.mode == 'dynamic'
        assert config.t_max is None

    def test_flags_beat_file(self, config_file):
        config = resolve_config(config_file, {'K': 2, 'min_leaf': None}, environ={})
        assert config.K == 2
        assert config.min_leaf == 3

    def test_seed_from_environment(self):
        assert resolve_config(environ={'BOOSTR_SEED': '42'}).seed == 42

    def test_explicit_seed_beats_environment(self, config_file):
        assert resolve_config(config_file, environ={'BOOSTR_SEED': '42'}).seed == 11
        assert resolve_config(None, {'seed': 3}, environ={'BOOSTR_SEED': '42'}).seed == 3

    def test_unknown_override(self):
        with pytest.raises(InvalidArgumentError):
            resolve_config(None, {'depth': 3}, environ={})

    def test_unparseable_value(self, tmp_path):
        path = tmp_path / 'bad.cfg'
        path.write_text('K = many\n')
        with pytest.raises(InvalidArgumentError):
            resolve_config(path, environ={})

    @pytest.mark.parametrize('overrides', [{'threads': 0}, {'K': 0}, {'m': 1}, {'mode': 'hybrid'},
                                           {'t_max': -1.0}, {'d_max': 1}])
    def test_invalid_values(self, overrides):
        with pytest.raises(InvalidArgumentError):
            resolve_config(None, overrides, environ={})

    def test_boost_config_carries_threads(self):
        config = resolve_config(None, {'threads': 3, 'gamma2': 4.0}, environ={})
        boost = config.boost_config()
        assert boost.n_jobs == 3
        assert boost.gamma2 == 4.0
