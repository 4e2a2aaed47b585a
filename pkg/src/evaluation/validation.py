"""
Repeated train/test evaluation, Latin hypercube tuning designs and the
extrapolation comparison.
"""

import logging
import re
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from src.core.boost_static import BoostConfig, fit_static
from src.core.data import Curve, Dataset, censor_at
from src.core.errors import InvalidArgumentError, UndefinedMetricError
from src.data.dataset_specs import get_static_data
from src.data.simulate import true_cumulative_intensity
from src.evaluation.baselines import hpp_loglinear_fit, mcf_knn, pooled_mcf, time_feature_booster_fit
from src.evaluation.metrics import c_index, l2_distance, mse_counts
from src.utils.parallel import ordered_map

logger = logging.getLogger(__name__)

# A fitted method maps a feature matrix to predicted curves (n x m) on the training grid.
Predictor = Callable[[np.ndarray], np.ndarray]

METHOD_NAMES = ("boostr", "mcf", "mcf-knn", "hpp", "time-booster", "oracle")


@dataclass(frozen=True)
class MethodOptions:
    config: BoostConfig
    knn_k: int = 20
    time_config: Optional[BoostConfig] = None


def _fit_method(name: str, train: Dataset, options: MethodOptions) -> Predictor:
    match = re.fullmatch(r"boostr(?::([\d.]+):([\d.]+))?", name)
    if match:
        config = options.config
        if match.group(1) is not None:
            config = replace(config, gamma1=float(match.group(1)), gamma2=float(match.group(2)))
        return fit_static(train, config).predict_matrix
    if name == "mcf":
        curve = pooled_mcf(train)
        return lambda X: np.tile(curve.values, (len(X), 1))
    if name == "mcf-knn":
        k = min(options.knn_k, train.n)
        return lambda X: np.vstack([mcf_knn(train, x, k).values for x in X])
    if name == "hpp":
        return hpp_loglinear_fit(train).predict_matrix
    if name == "time-booster":
        return time_feature_booster_fit(train, options.time_config or options.config).predict_matrix
    if name == "oracle":
        if train.name not in ("A", "B", "C", "D"):
            raise InvalidArgumentError(f"the oracle needs a simulated dataset A-D, got {train.name!r}")
        points = train.grid.points
        return lambda X: np.vstack([true_cumulative_intensity(train.name, x, points) for x in X])
    raise InvalidArgumentError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")


def evaluate_predictions(predicted: np.ndarray, test: Dataset, t_eval: float) -> Dict[str, float]:
    """C-index, mean L2 distance to the empirical MCF and count MSE on a test set."""
    curves = [Curve(test.grid, row) for row in predicted]
    histories = [ind.events for ind in test.individuals]
    try:
        concordance = c_index(curves, histories, t_eval)
    except UndefinedMetricError as exc:
        logger.warning("C-index undefined: %s", exc)
        concordance = float('nan')
    empirical = test.mcf_matrix
    l2 = float(np.mean([
        l2_distance(curve, Curve(test.grid, empirical[i], test.mask_matrix[i]))
        for i, curve in enumerate(curves)
    ]))
    eligible = [k for k, h in enumerate(histories) if h.censor >= t_eval]
    if eligible:
        mse = mse_counts([curves[k] for k in eligible], [histories[k] for k in eligible], t_eval)
    else:
        mse = float('nan')
    return {"c_index": concordance, "l2": l2, "mse_counts": mse}


@dataclass
class MetricReport:
    """Per-replicate metrics and their summary per method."""
    per_rep: pd.DataFrame
    summary: pd.DataFrame

    def mean(self, method: str, metric: str = "c_index") -> float:
        return float(self.summary.loc[method, (metric, "mean")])


def summarize(per_rep: pd.DataFrame) -> pd.DataFrame:
    metrics = ["c_index", "l2", "mse_counts"]
    grouped = per_rep.groupby("method", sort=False)[metrics]
    summary = grouped.agg(["mean", lambda s: s.quantile(0.25), "median", lambda s: s.quantile(0.75)])
    summary.columns = pd.MultiIndex.from_tuples(
        [(metric, stat) for metric in metrics for stat in ("mean", "q1", "median", "q3")])
    return summary


def cross_validate(dataset: Dataset, methods: Sequence[str], config: BoostConfig,
                   split: Tuple[int, int] = (150, 50), reps: int = 50, seed: int = 0,
                   t_eval: Optional[float] = None, knn_k: int = 20,
                   time_config: Optional[BoostConfig] = None, n_jobs: int = 1,
                   progress: bool = False) -> MetricReport:
    """
    Repeated random train/test splits scored by every requested method.

    Individuals are ordered by id before splitting, so the result does not
    depend on the input order. Replicate r uses the random stream (seed, r).

    Args:
        dataset: Full dataset
        methods: Method names (boostr, boostr:g1:g2, mcf, mcf-knn, hpp, time-booster, oracle)
        config: Boosting configuration for boostr
        split: Training and test sizes
        reps: Number of replicates
        seed: Base seed
        t_eval: Evaluation time (defaults to the grid horizon)
        knn_k: Neighbourhood size for mcf-knn
        time_config: Configuration of the time-feature booster
        n_jobs: Replicates run in parallel
        progress: Show a progress bar

    Returns:
        MetricReport with one row per (method, replicate)
    """
    train_size, test_size = split
    if train_size < 1 or test_size < 1 or train_size + test_size > dataset.n:
        raise InvalidArgumentError(f"split {split} does not fit {dataset.n} individuals")
    if reps < 1:
        raise InvalidArgumentError(f"reps must be >= 1, got {reps}")
    ordered = dataset.sorted_by_id()
    t_eval = dataset.grid.t_max if t_eval is None else t_eval
    options = MethodOptions(replace(config, n_jobs=1) if n_jobs != 1 else config, knn_k, time_config)

    def run(rep: int) -> List[Dict]:
        perm = np.random.default_rng([seed, rep]).permutation(ordered.n)
        train = ordered.subset(perm[:train_size])
        test = ordered.subset(perm[train_size:train_size + test_size])
        rows = []
        for name in methods:
            predicted = _fit_method(name, train, options)(test.X)
            rows.append({"method": name, "rep": rep, **evaluate_predictions(predicted, test, t_eval)})
        return rows

    results = ordered_map(run, range(reps), n_jobs, desc='replicates', progress=progress)
    per_rep = pd.DataFrame([row for rows in results for row in rows])
    logger.info("Cross-validated %d method(s) over %d replicate(s)", len(methods), reps)
    return MetricReport(per_rep, summarize(per_rep))


@dataclass
class LhdDesign:
    """Latin hypercube runs over (gamma1, gamma2)."""
    runs: np.ndarray
    ranges: Tuple[Tuple[float, float], Tuple[float, float]]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"run": np.arange(1, len(self.runs) + 1),
                             "gamma1": self.runs[:, 0], "gamma2": self.runs[:, 1]})


def lhd_sample(ranges: Sequence[Tuple[float, float]], n_runs: int, seed: int = 0,
               n_candidates: Optional[int] = None) -> LhdDesign:
    """
    Maximin Latin hypercube design.

    Draws random Latin designs (one point per stratum and dimension, uniform
    within the cell) and keeps the one whose smallest pairwise distance in the
    unit cube is largest.
    """
    if n_runs < 2:
        raise InvalidArgumentError(f"n_runs must be >= 2, got {n_runs}")
    n_candidates = n_candidates or get_static_data()[3]["n_candidates"]
    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in ranges], dtype=float)
    widths = np.array([hi - lo for lo, hi in ranges], dtype=float)

    best, best_distance = None, -np.inf
    for _ in range(n_candidates):
        strata = np.column_stack([rng.permutation(n_runs) for _ in ranges])
        unit = (strata + rng.uniform(size=strata.shape)) / n_runs
        distance = pdist(unit).min()
        if distance > best_distance:
            best, best_distance = unit, distance
    runs = lows + best * widths
    return LhdDesign(runs, tuple((float(lo), float(hi)) for lo, hi in ranges))


def tune(dataset: Dataset, design: LhdDesign, config: BoostConfig, n_jobs: int = 1,
         progress: bool = False) -> pd.DataFrame:
    """
    Fit one booster per design run and report its leaves-per-tree distribution.

    Runs whose median leaf count lies in the target range (4 to 8) are flagged.
    """
    low, high = get_static_data()[3]["target_leaves"]
    inner = replace(config, n_jobs=1) if n_jobs != 1 else config

    def run(index: int) -> Dict:
        gamma1, gamma2 = design.runs[index]
        ensemble = fit_static(dataset, replace(inner, gamma1=float(gamma1), gamma2=float(gamma2)))
        leaves = np.array(ensemble.leaves_per_tree)
        median = float(np.median(leaves))
        return {"run": index + 1, "gamma1": float(gamma1), "gamma2": float(gamma2),
                "mean_leaves": float(leaves.mean()), "median_leaves": median,
                "min_leaves": int(leaves.min()), "max_leaves": int(leaves.max()),
                "final_loss": ensemble.training_loss[-1],
                "in_target": bool(low <= median <= high)}

    report = pd.DataFrame(ordered_map(run, range(len(design.runs)), n_jobs, desc='runs', progress=progress))
    logger.info("Tuning: %d of %d run(s) have a median of %d-%d leaves",
                int(report["in_target"].sum()), len(report), low, high)
    return report


def compare_extrapolation(train: Dataset, test: Dataset, config: BoostConfig,
                          time_config: Optional[BoostConfig] = None,
                          t_train: Optional[float] = None, t_pred: Optional[float] = None) -> pd.DataFrame:
    """
    Train on data censored at t_train and predict test counts at t_pred.

    Boost-R extends its curves by their last-segment slope; the time-feature
    booster is evaluated directly at t_pred.

    Returns:
        One row per (method, test individual) with the predictions at t_train
        and t_pred, the observed count at t_pred and, for Boost-R, the
        last-segment slope of the fitted curve (NaN for the time-feature booster)
    """
    settings = get_static_data()[2]
    t_train = settings["train_horizon"] if t_train is None else t_train
    t_pred = settings["prediction_horizon"] if t_pred is None else t_pred
    cut = censor_at(train, t_train)
    boostr = fit_static(cut, config)
    booster = time_feature_booster_fit(cut, time_config or config)

    rows = []
    for ind in test.individuals:
        observed = float(ind.events.count_at(t_pred)) if ind.events.censor >= t_pred else float('nan')
        curve = Curve(cut.grid, boostr.predict_matrix(ind.x)[0])
        at_train, at_pred = curve.at([t_train, t_pred])
        slope = (curve.values[-1] - curve.values[-2]) / cut.grid.delta
        rows.append({"method": "boostr", "id": ind.id, "pred_train": float(at_train),
                     "pred_horizon": float(at_pred), "observed": observed, "slope": float(slope)})
        at_train, at_pred = booster.predict_at(ind.x, [t_train, t_pred])
        rows.append({"method": "time-booster", "id": ind.id, "pred_train": float(at_train),
                     "pred_horizon": float(at_pred), "observed": observed, "slope": float("nan")})
    return pd.DataFrame(rows)


def extrapolation_mse(comparison: pd.DataFrame) -> pd.Series:
    """Mean squared error of the t_pred predictions per method."""
    valid = comparison.dropna(subset=["observed"])
    errors = (valid["pred_horizon"] - valid["observed"]) ** 2
    return errors.groupby(valid["method"], sort=False).mean()
