"""
B-spline bases over dynamic feature values and their integrals along a path.

A basis built with (u, v) has u internal knots, degree v - 1 and u + v basis
functions. Evaluation clamps to the knot span, so the basis is a partition of
unity everywhere.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.core.data import Dataset, DynamicSeries, TimeGrid
from src.core.errors import DegenerateRangeError, InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Clamped B-spline basis on [lo, hi]."""
    u: int
    v: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        if knots.size != self.u + 2 * self.v:
            raise InvalidArgumentError(
                f"expected {self.u + 2 * self.v} knots for u={self.u}, v={self.v}, got {knots.size}")
        if np.any(np.diff(knots) < 0):
            raise InvalidArgumentError("knot vector must be non-decreasing")
        knots.setflags(write=False)
        object.__setattr__(self, 'knots', knots)

    @property
    def degree(self) -> int:
        return self.v - 1

    @property
    def n_basis(self) -> int:
        return self.u + self.v

    @property
    def lo(self) -> float:
        return float(self.knots[0])

    @property
    def hi(self) -> float:
        return float(self.knots[-1])

    @property
    def internal_knots(self) -> np.ndarray:
        return self.knots[self.v:self.v + self.u]

    def evaluate(self, z) -> np.ndarray:
        """
        Evaluate every basis function by the Cox-de Boor recursion.

        Args:
            z: Scalar or 1-D array of feature values (clamped to [lo, hi])

        Returns:
            Array of shape z.shape + (n_basis,)
        """
        z = np.clip(np.asarray(z, dtype=float), self.lo, self.hi)
        flat = z.reshape(-1)
        t = self.knots
        n_intervals = t.size - 1

        # degree 0: the interval holding z, with z == hi assigned to the last real span
        span = np.searchsorted(t, flat, side='right') - 1
        span = np.clip(span, self.degree, self.n_basis - 1)
        B = np.zeros((flat.size, n_intervals))
        B[np.arange(flat.size), span] = 1.0

        for k in range(1, self.degree + 1):
            nxt = np.zeros((flat.size, n_intervals - k))
            for i in range(n_intervals - k):
                left = t[i + k] - t[i]
                right = t[i + k + 1] - t[i + 1]
                if left > 0:
                    nxt[:, i] += (flat - t[i]) / left * B[:, i]
                if right > 0:
                    nxt[:, i] += (t[i + k + 1] - flat) / right * B[:, i + 1]
            B = nxt
        return B[:, :self.n_basis].reshape(z.shape + (self.n_basis,))


def make_basis(samples, u: int, v: int) -> SplineBasis:
    """
    Build a clamped basis with knots at evenly spaced quantiles of the samples.

    Args:
        samples: Pooled values of one dynamic feature
        u: Number of internal knots (>= 0)
        v: Order parameter (>= 1); the degree is v - 1

    Returns:
        SplineBasis with u + v basis functions
    """
    if u < 0 or v < 1:
        raise InvalidArgumentError(f"need u >= 0 and v >= 1, got u={u}, v={v}")
    values = np.asarray(samples, dtype=float).reshape(-1)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise DegenerateRangeError("no finite samples to place knots on")
    lo, hi = float(values.min()), float(values.max())
    if not lo < hi:
        raise DegenerateRangeError(f"all samples equal {lo}; a spline range needs two distinct values")

    internal = np.quantile(values, np.arange(1, u + 1) / (u + 1)) if u else np.empty(0)
    inside = np.concatenate(([lo], internal, [hi]))
    if np.any(np.diff(inside) <= 0):
        logger.warning("Quantile knots are not strictly inside (%g, %g); using uniform knots", lo, hi)
        internal = np.linspace(lo, hi, u + 2)[1:-1]
    knots = np.concatenate((np.full(v, lo), internal, np.full(v, hi)))
    return SplineBasis(u, v, knots)


def basis_eval(basis: SplineBasis, z: float) -> np.ndarray:
    """Values of all u + v basis functions at z."""
    return basis.evaluate(float(z))


def integrate_basis_at(basis: SplineBasis, series: DynamicSeries, times) -> np.ndarray:
    """
    Integral of B(z(tau)) from 0 to each requested time.

    The path is held constant between samples, the first value is used back
    to time 0 and the last value is held forever, so the integral is exact.

    Args:
        basis: Spline basis of the feature
        series: Samples of the feature for one individual
        times: 1-D array of non-negative times

    Returns:
        Array of shape (len(times), n_basis)
    """
    if series.times.size == 0:
        raise InvalidArgumentError("dynamic series is empty")
    times = np.asarray(times, dtype=float)
    starts = np.array(series.times, dtype=float)
    starts[0] = 0.0
    B = basis.evaluate(series.values)

    cumulative = np.zeros((starts.size, basis.n_basis))
    if starts.size > 1:
        cumulative[1:] = np.cumsum(np.diff(starts)[:, None] * B[:-1], axis=0)
    segment = np.searchsorted(starts, times, side='right') - 1
    segment = np.clip(segment, 0, starts.size - 1)
    partial = np.maximum(times - starts[segment], 0.0)
    return cumulative[segment] + partial[:, None] * B[segment]


def integrate_basis(basis: SplineBasis, series: DynamicSeries, grid: TimeGrid) -> np.ndarray:
    """Integrated basis Phi[j, b] at every grid point, shape (m, n_basis)."""
    return integrate_basis_at(basis, series, grid.points)


def build_bases(dataset: Dataset, u: int, v: int) -> Tuple[SplineBasis, ...]:
    """One basis per dynamic feature from the pooled samples of all individuals."""
    bases = []
    for l in range(dataset.q):
        pooled = np.concatenate([ind.z[l].values for ind in dataset.individuals])
        bases.append(make_basis(pooled, u, v))
    return tuple(bases)


def integrated_features(bases: Sequence[SplineBasis], z_series: Sequence[DynamicSeries], times) -> np.ndarray:
    """
    Flattened integrated design for one individual's dynamic series.

    Returns:
        Array of shape (len(times), q * n_basis); group l occupies columns
        l * n_basis to (l + 1) * n_basis
    """
    if len(z_series) != len(bases):
        raise InvalidArgumentError(f"got {len(z_series)} dynamic series, expected {len(bases)}")
    blocks = [integrate_basis_at(basis, series, times) for basis, series in zip(bases, z_series)]
    return np.concatenate(blocks, axis=1)
