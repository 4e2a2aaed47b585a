"""
Seeded generators for recurrent-event data.

Homogeneous processes use exponential inter-arrival times; inhomogeneous ones
use thinning against a piecewise-constant envelope. Every individual draws
from its own stream seeded by (seed, index), so adding individuals never
changes the histories of the others.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.data import Dataset, DynamicSeries, EventHistory, Individual, build_grid
from src.core.errors import BoundViolationError, InvalidArgumentError
from src.data.dataset_specs import get_static_data

logger = logging.getLogger(__name__)

Envelope = Sequence[Tuple[float, float, float]]

DYADIC_DEPTH = 60


def _individual_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


@dataclass(frozen=True)
class PowerLawIntensity:
    """lambda(t) = a * t**b on (0, horizon]."""
    a: float
    b: float

    def __post_init__(self):
        if self.a < 0:
            raise InvalidArgumentError(f"intensity scale must be non-negative, got {self.a}")
        if self.b <= -1:
            raise InvalidArgumentError(f"exponent must exceed -1 for a finite cumulative, got {self.b}")

    def __call__(self, t):
        return self.a * np.power(t, self.b)

    def cumulative(self, t):
        return self.a * np.power(t, self.b + 1) / (self.b + 1)

    def envelope(self, horizon: float) -> List[Tuple[float, float, float]]:
        """
        Piecewise bounds on dyadic pieces [h 2^-j, h 2^-(j-1)].

        The supremum of a power law on a piece sits at its left end for
        b < 0 and at its right end otherwise. The interval below h 2^-60 is
        left out.
        """
        edges = horizon * np.power(2.0, -np.arange(DYADIC_DEPTH, -1, -1))
        pieces = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            bound = float(self(lo if self.b < 0 else hi))
            pieces.append((float(lo), float(hi), bound))
        return pieces


def sim_hpp(rate: float, censor: float, rng: np.random.Generator) -> EventHistory:
    """
    Homogeneous Poisson process on (0, censor] by exponential inter-arrivals.

    Args:
        rate: Constant intensity (>= 0)
        censor: Censoring time
        rng: Random generator

    Returns:
        EventHistory of the simulated events
    """
    if rate < 0:
        raise InvalidArgumentError(f"rate must be non-negative, got {rate}")
    times = []
    if rate > 0:
        t = rng.exponential(1.0 / rate)
        while t <= censor:
            times.append(t)
            t += rng.exponential(1.0 / rate)
    return EventHistory(np.array(times), censor)


def sim_nhpp_thinning(intensity: Callable[[np.ndarray], np.ndarray], bound: Union[float, Envelope],
                      censor: float, rng: np.random.Generator) -> EventHistory:
    """
    Inhomogeneous Poisson process on (0, censor] by thinning.

    Candidates are drawn piece by piece from a homogeneous process at the
    piece's bound and kept with probability intensity(t) / bound.

    Args:
        intensity: Vectorised intensity function
        bound: Global bound, or pieces (lo, hi, bound) covering (0, censor]
        censor: Censoring time
        rng: Random generator

    Returns:
        EventHistory of the accepted events
    """
    if np.isscalar(bound):
        pieces = [(0.0, censor, float(bound))]
    else:
        pieces = [(lo, min(hi, censor), b) for lo, hi, b in bound if lo < censor]

    accepted = []
    for lo, hi, piece_bound in pieces:
        if piece_bound < 0:
            raise InvalidArgumentError(f"envelope bound must be non-negative, got {piece_bound}")
        if piece_bound == 0 or hi <= lo:
            continue
        n_candidates = rng.poisson(piece_bound * (hi - lo))
        if n_candidates == 0:
            continue
        candidates = np.sort(rng.uniform(lo, hi, size=n_candidates))
        rates = np.asarray(intensity(candidates), dtype=float)
        if np.any(rates > piece_bound * (1 + 1e-12)):
            worst = int(np.argmax(rates - piece_bound))
            raise BoundViolationError(
                f"intensity {rates[worst]:.6g} at t={candidates[worst]:.6g} exceeds the bound {piece_bound:.6g}")
        keep = rng.uniform(size=n_candidates) * piece_bound <= rates
        accepted.append(candidates[keep])
    times = np.sort(np.concatenate(accepted)) if accepted else np.empty(0)
    times = times[(times > 0) & (times <= censor)]
    return EventHistory(times, censor)


# Region rules of the benchmark datasets

def rate_A(x: np.ndarray) -> float:
    rates = get_static_data()[0]["A"]["rates"]
    if x[0] <= 0.5 and x[1] <= 0.5:
        return rates["low"]
    if x[0] > 0.5 and x[1] > 0.5:
        return rates["high"]
    return rates["mid"]


def scale_C(x: np.ndarray) -> float:
    spec = get_static_data()[0]["C"]
    r = np.hypot(x[0] - 0.5, x[1] - 0.5)
    inner, outer = spec["radii"]
    if r <= inner:
        return spec["scales"][0]
    if r <= outer:
        return spec["scales"][1]
    return spec["scales"][2]


def scale_D(x: np.ndarray) -> float:
    spec = get_static_data()[0]["D"]
    w1, w2 = spec["weights"]
    return spec["scale"] * np.exp(w1 * (x[0] - 0.5) ** 2 + w2 * (x[1] - 0.5) ** 2)


def true_cumulative_intensity(name: str, x: np.ndarray, t) -> np.ndarray:
    """
    Closed-form cumulative intensity of a benchmark dataset.

    Args:
        name: One of A, B, C, D
        x: Static features of one individual
        t: Time or array of times

    Returns:
        mu(t) for that individual
    """
    t = np.asarray(t, dtype=float)
    spec = get_static_data()[0]
    if name in ("A", "B"):
        return rate_A(x) * t
    if name == "C":
        return PowerLawIntensity(scale_C(x), spec["C"]["exponent"]).cumulative(t)
    if name == "D":
        return PowerLawIntensity(scale_D(x), spec["D"]["exponent"]).cumulative(t)
    raise InvalidArgumentError(f"no closed-form truth for dataset {name!r}")


def _static_dataset(name: str, n: int, seed: int, m: Optional[int],
                    simulate_one: Callable[[np.ndarray, float, np.random.Generator], EventHistory],
                    p: int) -> Dataset:
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    spec = get_static_data()[0][name]
    horizon = spec["horizon"]
    individuals = []
    for i in range(n):
        rng = _individual_rng(seed, i)
        x = rng.uniform(size=p)
        individuals.append(Individual(str(i + 1), x, simulate_one(x, horizon, rng)))
    logger.info("Simulated dataset %s: n=%d, seed=%d", name, n, seed)
    return Dataset(tuple(individuals), build_grid(horizon, m or spec["m"]), name)


def gen_dataset_A(n: int = 200, seed: int = 0, m: Optional[int] = None) -> Dataset:
    """Homogeneous rates 0.01 / 0.05 / 0.10 by quadrant pattern of (x1, x2)."""
    return _static_dataset("A", n, seed, m, lambda x, c, rng: sim_hpp(rate_A(x), c, rng), p=2)


def gen_dataset_B(n: int = 200, seed: int = 0, m: Optional[int] = None) -> Dataset:
    """Dataset A plus eight uniform features unrelated to the events."""
    return _static_dataset("B", n, seed, m, lambda x, c, rng: sim_hpp(rate_A(x), c, rng),
                           p=get_static_data()[0]["B"]["p"])


def gen_dataset_C(n: int = 1000, seed: int = 0, m: Optional[int] = None) -> Dataset:
    """c(x) * t^-0.5 with c = 1.5 in the central disk, 1 in the annulus and 0.5 outside."""
    exponent = get_static_data()[0]["C"]["exponent"]

    def simulate_one(x, horizon, rng):
        law = PowerLawIntensity(scale_C(x), exponent)
        return sim_nhpp_thinning(law, law.envelope(horizon), horizon, rng)

    return _static_dataset("C", n, seed, m, simulate_one, p=2)


def gen_dataset_D(n: int = 1000, seed: int = 0, m: Optional[int] = None) -> Dataset:
    """0.01 * t^0.5 * exp(0.5 (x1 - 0.5)^2 + 2 (x2 - 0.5)^2)."""
    exponent = get_static_data()[0]["D"]["exponent"]

    def simulate_one(x, horizon, rng):
        law = PowerLawIntensity(scale_D(x), exponent)
        return sim_nhpp_thinning(law, law.envelope(horizon), horizon, rng)

    return _static_dataset("D", n, seed, m, simulate_one, p=2)


def gen_morvita(n: int = 1000, sigma: float = 0.0, seed: int = 0, beta0: Optional[float] = None,
                treatment_probability: Optional[float] = None, horizon: Optional[float] = None,
                max_events: Optional[int] = 4, m: Optional[int] = None) -> Dataset:
    """
    Random-effects recurrent-event trial.

    The k-th event of subject i arrives at rate exp(beta0 + beta_k Z_i + v_i)
    after the previous one (total-time clock), with Z_i ~ Bernoulli(p_treat)
    fixed per subject and v_i ~ N(0, sigma^2). The effect vector beta_k is
    chosen by which side of 0.5 each of x1 and x2 falls; events after the
    fourth reuse beta_4. Observation stops at the max_events-th event or at
    the horizon, whichever comes first.

    Args:
        n: Number of subjects
        sigma: Random-effect standard deviation
        seed: Base seed
        beta0: Baseline log-intensity (default log(0.025))
        treatment_probability: P(Z = 1) (default 0.5)
        horizon: Administrative censoring time (default 120)
        max_events: Event cap, or None for no cap
        m: Grid size (default one point per day)

    Returns:
        Dataset with static features (x1, x2, Z)
    """
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be non-negative, got {sigma}")
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    spec = get_static_data()[0]["morvita"]
    beta0 = spec["beta0"] if beta0 is None else beta0
    p_treat = spec["treatment_probability"] if treatment_probability is None else treatment_probability
    horizon = spec["horizon"] if horizon is None else float(horizon)
    if m is None:
        m = max(2, int(round(horizon * spec["m"] / spec["horizon"])))

    individuals = []
    for i in range(n):
        rng = _individual_rng(seed, i)
        x12 = rng.uniform(size=2)
        z = float(rng.uniform() < p_treat)
        v = rng.normal(0.0, sigma) if sigma > 0 else 0.0
        effects = spec["effects"][(int(x12[0] >= 0.5), int(x12[1] >= 0.5))]

        times = []
        t = 0.0
        censor = horizon
        while True:
            k = min(len(times), len(effects) - 1)
            rate = np.exp(beta0 + effects[k] * z + v)
            t += rng.exponential(1.0 / rate)
            if t > horizon:
                break
            times.append(t)
            if max_events is not None and len(times) >= max_events:
                censor = t
                break
        x = np.array([x12[0], x12[1], z])
        individuals.append(Individual(str(i + 1), x, EventHistory(np.array(times), censor)))
    logger.info("Simulated morvita trial: n=%d, sigma=%g, seed=%d", n, sigma, seed)
    return Dataset(tuple(individuals), build_grid(horizon, m), "morvita")


def gen_dynamic_planted(n: int = 200, seed: int = 0, n_irrelevant: int = 1,
                        m: Optional[int] = None) -> Dataset:
    """
    Two static regions with opposite dynamic effects.

    Each subject has a sensor path z1(t) = 0.5 + 0.4 sin(2 pi t / period + phase)
    sampled every unit of time and held in between; the intensity is
    base * exp(+effect (z1 - 0.5)) when x1 <= 0.5 and base * exp(-effect (z1 - 0.5))
    otherwise. Irrelevant dynamic features are uniform noise paths.

    Returns:
        Dataset with p = 2 static and q = 1 + n_irrelevant dynamic features
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    spec = get_static_data()[0]["planted"]
    horizon, step = spec["horizon"], spec["sample_step"]
    sample_times = np.arange(0.0, horizon + step / 2, step)

    individuals = []
    for i in range(n):
        rng = _individual_rng(seed, i)
        x = rng.uniform(size=2)
        period = rng.uniform(20.0, 60.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        path = 0.5 + 0.4 * np.sin(2 * np.pi * sample_times / period + phase)
        sign = 1.0 if x[0] <= 0.5 else -1.0
        segment_rates = spec["base_rate"] * np.exp(sign * spec["effect"] * (path - 0.5))

        def intensity(t, rates=segment_rates):
            idx = np.clip(np.searchsorted(sample_times, t, side='right') - 1, 0, sample_times.size - 1)
            return rates[idx]

        ends = np.append(sample_times[1:], horizon)
        envelope = [(lo, hi, rate) for lo, hi, rate in zip(sample_times, ends, segment_rates) if hi > lo]
        events = sim_nhpp_thinning(intensity, envelope, horizon, rng)

        series = [DynamicSeries(sample_times, path)]
        for _ in range(n_irrelevant):
            series.append(DynamicSeries(sample_times, rng.uniform(size=sample_times.size)))
        individuals.append(Individual(str(i + 1), x, events, tuple(series)))
    logger.info("Simulated planted dynamic dataset: n=%d, seed=%d", n, seed)
    return Dataset(tuple(individuals), build_grid(horizon, m or spec["m"]), "planted")


GENERATORS = {
    "A": gen_dataset_A,
    "B": gen_dataset_B,
    "C": gen_dataset_C,
    "D": gen_dataset_D,
}


def generate(name: str, n: Optional[int] = None, seed: int = 0, sigma: float = 0.0) -> Dataset:
    """Generate a named dataset with its default size."""
    spec = get_static_data()[0]
    if name == "morvita":
        return gen_morvita(n or spec["morvita"]["n"], sigma=sigma, seed=seed)
    if name == "planted":
        return gen_dynamic_planted(n or spec["planted"]["n"], seed=seed)
    if name not in GENERATORS:
        raise InvalidArgumentError(f"unknown dataset {name!r}; choose from A, B, C, D, morvita, planted")
    return GENERATORS[name](n or spec[name]["n"], seed=seed)
