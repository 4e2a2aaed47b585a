"""
Static settings for the simulated benchmark datasets.
Contains region rates, simulation horizons, reference boosting settings and
hyperparameter search ranges.
"""

import math
from functools import lru_cache


@lru_cache(maxsize=1)
def get_static_data():
    """Cached static data - built once per process"""
    simulation = {
        "A": {"n": 200, "horizon": 100.0, "m": 100, "p": 2,
              "rates": {"low": 0.01, "mid": 0.05, "high": 0.10}},
        "B": {"n": 200, "horizon": 100.0, "m": 100, "p": 10, "n_redundant": 8,
              "rates": {"low": 0.01, "mid": 0.05, "high": 0.10}},
        "C": {"n": 1000, "horizon": 50.0, "m": 100, "p": 2,
              "radii": (0.2, 0.4), "scales": (1.5, 1.0, 0.5), "exponent": -0.5},
        "D": {"n": 1000, "horizon": 100.0, "m": 100, "p": 2,
              "scale": 0.01, "exponent": 0.5, "weights": (0.5, 2.0)},
        "morvita": {"n": 1000, "horizon": 120.0, "m": 120, "p": 3, "max_events": 4,
                    "beta0": math.log(0.025), "treatment_probability": 0.5,
                    "effects": {(0, 0): (-1.0, 0.0, 0.0, 0.0),
                                (0, 1): (-1.0, -1.0, 0.0, 0.0),
                                (1, 0): (-1.0, -1.0, -1.0, 0.0),
                                (1, 1): (-1.0, -1.0, -1.0, -1.0)}},
        "planted": {"n": 200, "horizon": 100.0, "m": 100, "p": 2,
                    "base_rate": 0.1, "effect": 2.0, "sample_step": 1.0},
    }

    boosting = {
        "A": {"K": 50, "gamma1": 300.0, "gamma2": 100.0, "d_max": 4},
        "B": {"K": 50, "gamma1": 300.0, "gamma2": 100.0, "d_max": 4},
        "C": {"K": 500, "gamma1": 10.0, "gamma2": 5.0, "d_max": 4},
        "D": {"K": 300, "gamma1": 100.0, "gamma2": 100.0, "d_max": 4},
        "morvita": {"K": 50, "gamma1": 10.0, "gamma2": 10.0, "d_max": 4},
    }

    comparison = {
        "morvita_gammas": [(10.0, 10.0), (10.0, 50.0), (50.0, 10.0), (50.0, 50.0)],
        "sigmas": (0.0, 0.1, 0.4),
        "train_horizon": 120.0,
        "prediction_horizon": 240.0,
        "time_booster_learning_rates": (0.1, 0.5, 1.0),
    }

    tuning = {
        "gamma1_range": (0.0, 600.0),
        "gamma2_range": (0.0, 200.0),
        "n_runs": 15,
        "target_leaves": (4, 8),
        "n_candidates": 200,
    }

    return simulation, boosting, comparison, tuning
