"""
Prediction metrics: concordance of cumulative counts, L2 distance between
curves and squared error of predicted counts.
"""

import logging
from typing import Optional, Sequence, Union

import numpy as np

from src.core.data import Curve, EventHistory, curve_integral
from src.core.errors import GridMismatchError, InvalidArgumentError, UndefinedMetricError

logger = logging.getLogger(__name__)


def _values_at(items, t_eval: Optional[float]) -> np.ndarray:
    items = list(items)
    if items and isinstance(items[0], Curve):
        if t_eval is None:
            raise InvalidArgumentError("t_eval is required to evaluate curves")
        return np.array([float(c.at(t_eval)) for c in items])
    if items and isinstance(items[0], EventHistory):
        if t_eval is None:
            raise InvalidArgumentError("t_eval is required to count events")
        return np.array([float(h.count_at(t_eval)) for h in items])
    return np.asarray(items, dtype=float)


def c_index(predictions: Sequence[Union[float, Curve]], observed: Sequence[Union[float, EventHistory]],
            t_eval: Optional[float] = None, censors: Optional[Sequence[float]] = None) -> float:
    """
    Fraction of individual pairs whose predicted ordering matches their observed counts.

    Pairs with equal observed counts are skipped; a tie in the predictions
    scores 0.5. Individuals censored before t_eval are dropped.

    Args:
        predictions: Predicted cumulative intensity at t_eval (numbers or curves)
        observed: Observed counts at t_eval (numbers or event histories)
        t_eval: Evaluation time, needed for curves and event histories
        censors: Censoring times; taken from the event histories when omitted

    Returns:
        Concordance in [0, 1]
    """
    predicted = _values_at(predictions, t_eval)
    counts = _values_at(observed, t_eval)
    if predicted.shape != counts.shape:
        raise InvalidArgumentError("predictions and observations differ in length")

    if censors is None and len(observed) and isinstance(observed[0], EventHistory):
        censors = [h.censor for h in observed]
    if censors is not None and t_eval is not None:
        keep = np.asarray(censors, dtype=float) >= t_eval
        if not keep.all():
            logger.debug("Dropping %d individual(s) censored before t=%g", int((~keep).sum()), t_eval)
        predicted, counts = predicted[keep], counts[keep]

    count_diff = np.sign(counts[:, None] - counts[None, :])
    pred_diff = np.sign(predicted[:, None] - predicted[None, :])
    upper = np.triu(np.ones(count_diff.shape, dtype=bool), k=1)
    comparable = upper & (count_diff != 0)
    n_pairs = int(comparable.sum())
    if n_pairs == 0:
        raise UndefinedMetricError("no pair of individuals has distinct observed counts")
    agreement = count_diff * pred_diff
    score = np.where(agreement > 0, 1.0, np.where(agreement < 0, 0.0, 0.5))
    return float(score[comparable].sum() / n_pairs)


def l2_distance(a: Curve, b: Curve) -> float:
    """Squared L2 distance of two curves over their common observed window."""
    if a.grid != b.grid:
        raise GridMismatchError(f"grid {b.grid} does not match {a.grid}")
    diff = a - b
    return curve_integral(diff, diff)


def mse_counts(predicted: Sequence[Union[float, Curve]], observed: Sequence[Union[float, EventHistory]],
               t_eval: Optional[float] = None) -> float:
    """Mean squared error between predicted and observed event counts at t_eval."""
    pred = _values_at(predicted, t_eval)
    obs = _values_at(observed, t_eval)
    if pred.shape != obs.shape:
        raise InvalidArgumentError("predictions and observations differ in length")
    if pred.size == 0:
        raise UndefinedMetricError("no individuals to average over")
    return float(np.mean((pred - obs) ** 2))
