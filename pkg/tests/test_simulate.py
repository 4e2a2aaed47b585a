"""
Tests for the seeded recurrent-event generators.
"""

import numpy as np
import pytest
from scipy import integrate, stats

from src.core.data import build_grid
from src.core.errors import BoundViolationError, InvalidArgumentError
from src.data.simulate import (PowerLawIntensity, gen_dataset_A, gen_dataset_C, gen_dataset_D, gen_dynamic_planted, gen_morvita,
                               generate, rate_A, scale_C, sim_hpp, sim_nhpp_thinning, true_cumulative_intensity)


class TestSimHpp:
    def test_count_moments(self):
        rng = np.random.default_rng(1)
        counts = np.array([sim_hpp(0.05, 100.0, rng).n_events for _ in range(2000)])
        assert counts.mean() == pytest.approx(5.0, abs=0.2)
        assert counts.var() == pytest.approx(5.0, abs=0.6)

    def test_zero_rate(self, rng):
        assert sim_hpp(0.0, 100.0, rng).n_events == 0

    def test_events_inside_window(self, rng):
        history = sim_hpp(1.0, 10.0, rng)
        assert np.all(history.times <= 10.0)
        assert np.all(np.diff(history.times) > 0)

    def test_rejects_negative_rate(self, rng):
        with pytest.raises(InvalidArgumentError):
            sim_hpp(-1.0, 10.0, rng)


class TestThinning:
    def test_power_law_mean(self):
        law = PowerLawIntensity(1.0, -0.5)
        rng = np.random.default_rng(2)
        counts = np.array([sim_nhpp_thinning(law, law.envelope(50.0), 50.0, rng).n_events for _ in range(2000)])
        standard_error = counts.std(ddof=1) / np.sqrt(counts.size)
        assert abs(counts.mean() - 2 * np.sqrt(50.0)) <= 3 * standard_error

    def test_event_times_follow_cumulative_shape(self):
        law = PowerLawIntensity(1.0, -0.5)
        rng = np.random.default_rng(3)
        times = np.concatenate([sim_nhpp_thinning(law, law.envelope(50.0), 50.0, rng).times for _ in range(300)])
        # given the count, event times are iid with cdf mu(t) / mu(50)
        result = stats.kstest(times, lambda t: np.sqrt(np.clip(t, 0, 50.0) / 50.0))
        assert result.pvalue > 1e-3

    def test_scalar_bound_matches_hpp_rate(self):
        rng = np.random.default_rng(4)
        counts = [sim_nhpp_thinning(lambda t: np.full_like(t, 0.2), 0.5, 50.0, rng).n_events for _ in range(1000)]
        assert np.mean(counts) == pytest.approx(10.0, abs=0.5)

    def test_constant_rate_inter_arrivals_are_exponential(self):
        rng = np.random.default_rng(6)
        history = sim_nhpp_thinning(lambda t: np.full_like(t, 0.2), 0.5, 50000.0, rng)
        gaps = np.diff(np.concatenate(([0.0], history.times)))
        assert gaps.size > 9000
        assert stats.kstest(gaps, 'expon', args=(0, 1 / 0.2)).pvalue > 1e-3

    def test_bound_violation(self, rng):
        with pytest.raises(BoundViolationError):
            sim_nhpp_thinning(lambda t: np.full_like(t, 2.0), 1.0, 100.0, rng)

    def test_envelope_dominates(self):
        for law in (PowerLawIntensity(0.7, -0.5), PowerLawIntensity(0.01, 0.5)):
            for lo, hi, bound in law.envelope(100.0):
                inside = np.linspace(lo, hi, 7)
                assert np.all(law(inside) <= bound * (1 + 1e-12))

    def test_rejects_non_integrable_exponent(self):
        with pytest.raises(InvalidArgumentError):
            PowerLawIntensity(1.0, -1.0)


class TestRegions:
    @pytest.mark.parametrize('x, rate', [([0.2, 0.3], 0.01), ([0.8, 0.9], 0.10),
                                         ([0.2, 0.8], 0.05), ([0.7, 0.1], 0.05), ([0.5, 0.5], 0.01)])
    def test_rate_a(self, x, rate):
        assert rate_A(np.array(x)) == rate

    @pytest.mark.parametrize('x, scale', [([0.5, 0.5], 1.5), ([0.8, 0.5], 1.0), ([0.0, 0.0], 0.5)])
    def test_scale_c(self, x, scale):
        assert scale_C(np.array(x)) == scale

    def test_true_cumulative_intensity(self):
        assert true_cumulative_intensity('A', np.array([0.9, 0.9]), 10.0) == pytest.approx(1.0)
        assert true_cumulative_intensity('C', np.array([0.5, 0.5]), 4.0) == pytest.approx(1.5 * 2 * 2.0)
        with pytest.raises(InvalidArgumentError):
            true_cumulative_intensity('morvita', np.array([0.5, 0.5]), 4.0)


class TestDatasets:
    def test_dataset_a_shape(self, small_a):
        assert small_a.n == 80
        assert small_a.p == 2
        assert small_a.grid.t_max == 100.0
        assert np.all(small_a.censors == 100.0)

    def test_individual_streams_are_independent_of_n(self):
        short = gen_dataset_A(n=5, seed=3)
        longer = gen_dataset_A(n=12, seed=3)
        assert short.individuals == longer.individuals[:5]

    def test_seed_changes_draws(self):
        assert gen_dataset_A(n=5, seed=1).individuals != gen_dataset_A(n=5, seed=2).individuals

    def test_dataset_c_uses_thinning(self):
        dataset = gen_dataset_C(n=20, seed=0, m=10)
        assert dataset.grid == build_grid(50.0, 10)
        assert sum(ind.events.n_events for ind in dataset.individuals) > 0

    def test_dataset_c_mean_count(self):
        # uniform features: E[c(x)] from the disk and annulus areas, times the integral of t^-0.5 up to 50
        inner, outer = np.pi * 0.2 ** 2, np.pi * 0.4 ** 2
        expected = (1.5 * inner + 1.0 * (outer - inner) + 0.5 * (1 - outer)) * 2 * np.sqrt(50.0)
        counts = np.array([ind.events.n_events for ind in gen_dataset_C(n=2000, seed=4, m=10).individuals])
        assert abs(counts.mean() - expected) <= 3 * counts.std(ddof=1) / np.sqrt(counts.size)

    def test_dataset_d_mean_count(self):
        first, _ = integrate.quad(lambda u: np.exp(0.5 * (u - 0.5) ** 2), 0, 1)
        second, _ = integrate.quad(lambda u: np.exp(2.0 * (u - 0.5) ** 2), 0, 1)
        expected = 0.01 * first * second * 100.0 ** 1.5 / 1.5
        counts = np.array([ind.events.n_events for ind in gen_dataset_D(n=2000, seed=4, m=10).individuals])
        assert abs(counts.mean() - expected) <= 3 * counts.std(ddof=1) / np.sqrt(counts.size)

    def test_generate_by_name(self):
        assert generate('B', n=4).p == 10
        assert generate('A', n=3, seed=1).name == 'A'
        with pytest.raises(InvalidArgumentError):
            generate('E', n=3)


class TestMorvita:
    def test_event_cap_censors_at_last_event(self):
        dataset = gen_morvita(n=300, sigma=0.4, seed=5, beta0=np.log(0.1))
        capped = 0
        for ind in dataset.individuals:
            assert ind.events.n_events <= 4
            if ind.events.n_events == 4:
                capped += 1
                assert ind.events.censor == ind.events.times[-1]
            else:
                assert ind.events.censor == 120.0
        assert capped > 0

    def test_treatment_is_binary_feature(self):
        dataset = gen_morvita(n=200, seed=1)
        assert dataset.p == 3
        assert set(np.unique(dataset.X[:, 2])) <= {0.0, 1.0}

    def test_no_cap(self):
        dataset = gen_morvita(n=200, seed=2, beta0=np.log(0.2), max_events=None)
        assert max(ind.events.n_events for ind in dataset.individuals) > 4
        assert np.all(dataset.censors == 120.0)

    def test_horizon_sets_grid(self):
        dataset = gen_morvita(n=10, seed=0, horizon=240.0)
        assert dataset.grid.t_max == 240.0
        assert dataset.grid.m == 240

    def test_rejects_negative_sigma(self):
        with pytest.raises(InvalidArgumentError):
            gen_morvita(n=10, sigma=-0.1)


class TestPlanted:
    def test_shape(self, small_planted):
        assert small_planted.p == 2
        assert small_planted.q == 2
        assert small_planted.grid.m == 20

    def test_paths_stay_in_band(self, small_planted):
        for ind in small_planted.individuals:
            assert np.all((ind.z[0].values >= 0.1 - 1e-12) & (ind.z[0].values <= 0.9 + 1e-12))

    def test_irrelevant_features(self):
        assert gen_dynamic_planted(n=3, seed=0, n_irrelevant=3, m=10).q == 4
