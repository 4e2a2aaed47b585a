"""
Core data model for recurrent-event boosting.

Holds event histories, dynamic feature series, the shared uniform time grid,
curves sampled on that grid and the dataset container, together with the
per-individual empirical mean cumulative function and the quadrature used by
every objective in the package.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import GridMismatchError, InvalidArgumentError

logger = logging.getLogger(__name__)


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


def id_sort_key(ident: str) -> Tuple[int, float, str]:
    """Numeric ids in numeric order (so "2" precedes "10"), then the rest as text."""
    try:
        value = float(ident)
    except ValueError:
        return (1, 0.0, ident)
    if np.isnan(value):
        return (1, 0.0, ident)
    return (0, value, ident)


@dataclass(frozen=True)
class TimeGrid:
    """Equally spaced evaluation times t_j = j * delta for j = 1..m."""
    t_max: float
    m: int

    def __post_init__(self):
        if not np.isfinite(self.t_max) or self.t_max <= 0:
            raise InvalidArgumentError(f"t_max must be positive, got {self.t_max}")
        if int(self.m) != self.m or self.m < 2:
            raise InvalidArgumentError(f"grid size m must be an integer >= 2, got {self.m}")
        object.__setattr__(self, 't_max', float(self.t_max))
        object.__setattr__(self, 'm', int(self.m))

    @property
    def delta(self) -> float:
        return self.t_max / self.m

    @cached_property
    def points(self) -> np.ndarray:
        return _frozen_array(np.linspace(self.delta, self.t_max, self.m))

    def n_observed(self, censor: float) -> int:
        """Number of grid points at or before the censoring time."""
        tolerance = 1e-9 * self.delta
        return int(np.searchsorted(self.points, censor + tolerance, side='right'))

    def weights(self, n_observed: Optional[int] = None) -> np.ndarray:
        """
        Trapezoid weights for integrating over [0, t_L].

        The first grid value is held back to the origin, so a constant curve
        integrates exactly; points after t_L get weight zero.

        Args:
            n_observed: Number of leading grid points L in the integration
                range (defaults to the whole grid)

        Returns:
            Length-m weight vector
        """
        L = self.m if n_observed is None else int(n_observed)
        w = np.zeros(self.m)
        if L <= 0:
            return w
        if L == 1:
            w[0] = self.delta
            return w
        w[:L] = self.delta
        w[0] = 1.5 * self.delta
        w[L - 1] = 0.5 * self.delta
        return w

    def relative_weights(self, n_observed: int) -> np.ndarray:
        """Weights for a prefix of length L divided by the full-grid weights."""
        return self.weights(n_observed) / self.weights()


def build_grid(t_max: float, m: int) -> TimeGrid:
    """
    Build the shared uniform time grid.

    Args:
        t_max: Horizon of the grid
        m: Number of grid points

    Returns:
        TimeGrid with spacing t_max / m
    """
    return TimeGrid(t_max, m)


@dataclass(frozen=True, eq=False)
class Curve:
    """A real-valued function sampled on a TimeGrid with an observed-prefix mask."""
    grid: TimeGrid
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.shape != (self.grid.m,):
            raise InvalidArgumentError(
                f"curve has {values.shape} values but the grid has {self.grid.m} points")
        if self.mask is None:
            mask = np.ones(self.grid.m, dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool)
        if mask.shape != (self.grid.m,):
            raise InvalidArgumentError("mask length does not match the grid")
        n_obs = int(mask.sum())
        if not mask[:n_obs].all():
            raise InvalidArgumentError("mask must be a prefix of observed points")
        mask.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', mask)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> 'Curve':
        return cls(grid, np.zeros(grid.m))

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> 'Curve':
        return cls(grid, np.full(grid.m, float(value)))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> 'Curve':
        return cls(grid, fn(grid.points))

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    def weights(self) -> np.ndarray:
        return self.grid.weights(self.n_observed)

    def _check_same_grid(self, other: 'Curve'):
        if self.grid != other.grid:
            raise GridMismatchError(f"grid {other.grid} does not match {self.grid}")

    def _combine(self, other, op) -> 'Curve':
        if isinstance(other, Curve):
            self._check_same_grid(other)
            return Curve(self.grid, op(self.values, other.values), self.mask & other.mask)
        return Curve(self.grid, op(self.values, float(other)), self.mask)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return Curve(self.grid, -self.values, self.mask)

    def integral(self) -> float:
        """Integral of the curve over its observed region."""
        return float(np.dot(self.weights(), self.values))

    def clamped(self) -> 'Curve':
        """Copy with negative values set to zero."""
        return Curve(self.grid, np.maximum(self.values, 0.0), self.mask)

    def at(self, times: Union[float, Sequence[float]], extrapolate: bool = True) -> np.ndarray:
        """
        Evaluate the curve at arbitrary times with cumulative semantics.

        Linear interpolation between grid points with value 0 at the origin.
        Beyond t_max the curve continues with its last-segment slope, or is
        held at its last value when extrapolate is False.

        Args:
            times: Scalar or sequence of non-negative times
            extrapolate: Whether to extend beyond t_max linearly

        Returns:
            Array of values, same shape as times
        """
        t = np.asarray(times, dtype=float)
        xp = np.concatenate(([0.0], self.grid.points))
        fp = np.concatenate(([0.0], self.values))
        out = np.interp(t, xp, fp)
        if extrapolate:
            slope = (self.values[-1] - self.values[-2]) / self.grid.delta
            beyond = t > self.grid.t_max
            out = np.where(beyond, self.values[-1] + slope * (t - self.grid.t_max), out)
        return out


def curve_integral(a: Curve, b: Curve) -> float:
    """
    Trapezoid approximation of the integral of a(t) * b(t).

    The integration range is the intersection of both observed regions.

    Args:
        a: First curve
        b: Second curve, on the same grid

    Returns:
        The integral as a float
    """
    if a.grid != b.grid:
        raise GridMismatchError(f"grid {b.grid} does not match {a.grid}")
    n_obs = min(a.n_observed, b.n_observed)
    return float(np.dot(a.grid.weights(n_obs), a.values * b.values))


@dataclass(frozen=True, eq=False)
class EventHistory:
    """Ascending event times of one individual plus its right-censoring time."""
    times: np.ndarray
    censor: float

    def __post_init__(self):
        times = _frozen_array(self.times)
        censor = float(self.censor)
        if times.ndim != 1:
            raise InvalidArgumentError("event times must be one-dimensional")
        if not np.isfinite(censor) or censor <= 0:
            raise InvalidArgumentError(f"censoring time must be positive, got {censor}")
        if times.size:
            if not np.all(np.isfinite(times)) or times[0] <= 0:
                raise InvalidArgumentError("event times must be positive and finite")
            if np.any(np.diff(times) <= 0):
                raise InvalidArgumentError("event times must be strictly ascending")
            if times[-1] > censor:
                raise InvalidArgumentError(
                    f"event at {times[-1]} is after the censoring time {censor}")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'censor', censor)

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def count_at(self, t) -> np.ndarray:
        """Number of events in (0, t]."""
        return np.searchsorted(self.times, t, side='right')

    def __eq__(self, other):
        if not isinstance(other, EventHistory):
            return NotImplemented
        return self.censor == other.censor and np.array_equal(self.times, other.times)


@dataclass(frozen=True, eq=False)
class DynamicSeries:
    """Samples of one dynamic feature, held constant between sample times."""
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _frozen_array(self.times)
        values = _frozen_array(self.values)
        if times.size == 0:
            raise InvalidArgumentError("dynamic series is empty")
        if times.shape != values.shape:
            raise InvalidArgumentError("dynamic series times and values differ in length")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("dynamic series times must be strictly ascending")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("dynamic series values must be finite")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    def value_at(self, t) -> np.ndarray:
        """Zero-order-hold value; times before the first sample take the first value."""
        idx = np.searchsorted(self.times, t, side='right') - 1
        return self.values[np.clip(idx, 0, self.times.size - 1)]

    def __eq__(self, other):
        if not isinstance(other, DynamicSeries):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class Individual:
    """One individual: static features, optional dynamic series and its events."""
    id: str
    x: np.ndarray
    events: EventHistory
    z: Tuple[DynamicSeries, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'id', str(self.id))
        x = _frozen_array(self.x)
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise InvalidArgumentError(f"individual {self.id}: static features must be a finite vector")
        object.__setattr__(self, 'x', x)
        for l, series in enumerate(self.z, start=1):
            if series.times[0] != 0:
                # the last value is held up to the censoring time
                raise InvalidArgumentError(f"individual {self.id}: dynamic feature {l} must be sampled at time 0")
        object.__setattr__(self, 'z', tuple(self.z))

    def __eq__(self, other):
        if not isinstance(other, Individual):
            return NotImplemented
        return (self.id == other.id and np.array_equal(self.x, other.x)
                and self.events == other.events and self.z == other.z)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Individuals sharing one time grid and fixed feature dimensions p and q."""
    individuals: Tuple[Individual, ...]
    grid: TimeGrid
    name: Optional[str] = None

    def __post_init__(self):
        individuals = tuple(self.individuals)
        if not individuals:
            raise InvalidArgumentError("dataset has no individuals")
        p = individuals[0].x.size
        q = len(individuals[0].z)
        for ind in individuals:
            if ind.x.size != p:
                raise InvalidArgumentError(f"individual {ind.id} has {ind.x.size} static features, expected {p}")
            if len(ind.z) != q:
                raise InvalidArgumentError(f"individual {ind.id} has {len(ind.z)} dynamic features, expected {q}")
        ids = [ind.id for ind in individuals]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("individual ids are not unique")
        object.__setattr__(self, 'individuals', individuals)

    @property
    def n(self) -> int:
        return len(self.individuals)

    @property
    def p(self) -> int:
        return self.individuals[0].x.size

    @property
    def q(self) -> int:
        return len(self.individuals[0].z)

    @cached_property
    def ids(self) -> List[str]:
        return [ind.id for ind in self.individuals]

    @cached_property
    def X(self) -> np.ndarray:
        """Static feature matrix, n x p."""
        return _frozen_array(np.vstack([ind.x for ind in self.individuals]))

    @cached_property
    def censors(self) -> np.ndarray:
        return _frozen_array([ind.events.censor for ind in self.individuals])

    @cached_property
    def n_observed(self) -> np.ndarray:
        """Per-individual count of observed grid points."""
        return _frozen_array([self.grid.n_observed(c) for c in self.censors], dtype=int)

    @cached_property
    def mask_matrix(self) -> np.ndarray:
        """Boolean n x m matrix of observed grid points."""
        mask = np.arange(self.grid.m)[None, :] < self.n_observed[:, None]
        mask.setflags(write=False)
        return mask

    @cached_property
    def weight_matrix(self) -> np.ndarray:
        """Per-individual quadrature weights, n x m."""
        return _frozen_array(np.vstack([self.grid.weights(L) for L in self.n_observed]))

    @cached_property
    def mcf_matrix(self) -> np.ndarray:
        """Empirical MCF values of every individual, n x m."""
        return _frozen_array(np.vstack(
            [empirical_mcf(ind.events, self.grid).values for ind in self.individuals]))

    def mcf_curves(self) -> Dict[str, Curve]:
        return {ind.id: empirical_mcf(ind.events, self.grid) for ind in self.individuals}

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        """Dataset restricted to the given positions, on the same grid."""
        return Dataset(tuple(self.individuals[i] for i in indices), self.grid, self.name)

    def sorted_by_id(self) -> 'Dataset':
        order = sorted(range(self.n), key=lambda i: id_sort_key(self.individuals[i].id))
        return self.subset(order)


def empirical_mcf(events: EventHistory, grid: TimeGrid) -> Curve:
    """
    Event-count step function of one individual on the grid.

    Args:
        events: The individual's event history
        grid: Shared time grid

    Returns:
        Curve with values[j] = #{events <= t_j} on the observed region; after
        the censoring time the mask is false and the count at censoring is held
    """
    n_obs = grid.n_observed(events.censor)
    values = events.count_at(grid.points).astype(float)
    values[n_obs:] = events.n_events
    mask = np.arange(grid.m) < n_obs
    return Curve(grid, values, mask)


def censor_at(dataset: Dataset, t_cut: float, m: Optional[int] = None) -> Dataset:
    """
    Apply additional Type-I censoring at t_cut.

    Args:
        dataset: Source dataset
        t_cut: New administrative censoring time
        m: Grid size of the new grid (default keeps the grid spacing)

    Returns:
        Dataset whose censoring times are min(c_i, t_cut) on a grid ending at t_cut
    """
    if t_cut <= 0:
        raise InvalidArgumentError(f"t_cut must be positive, got {t_cut}")
    if m is None:
        m = max(2, int(round(t_cut / dataset.grid.delta)))
    individuals = []
    for ind in dataset.individuals:
        censor = min(ind.events.censor, t_cut)
        times = ind.events.times[ind.events.times <= censor]
        individuals.append(Individual(ind.id, ind.x, EventHistory(times, censor), ind.z))
    return Dataset(tuple(individuals), build_grid(t_cut, m), dataset.name)
