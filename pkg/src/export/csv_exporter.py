"""
CSV exports of fitted models and evaluation reports.

Every export builds a table, writes it with a fixed header and returns the
DataFrame. Column layouts are listed in docs/FILE_FORMATS.md.
"""

import json
import logging
import os
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.core.boost_dynamic import EnsembleDynamic, beta_by_region_export
from src.core.boost_static import EnsembleStatic, feature_importance
from src.core.data import Curve
from src.core.errors import UnsupportedOperationError
from src.core.io import curves_frame
from src.evaluation.validation import MetricReport

logger = logging.getLogger(__name__)

Ensemble = Union[EnsembleStatic, EnsembleDynamic]

TRACE_COLUMNS = ['tree', 'training_loss']
LEAVES_COLUMNS = ['tree', 'leaves']
IMPORTANCE_COLUMNS = ['feature', 'raw', 'standardized']
PARTITION_COLUMNS = ['tree', 'leaf', 'feature', 'lower', 'upper']
LEAF_CURVE_COLUMNS = ['tree', 'leaf', 't', 'value']
SURFACE_COLUMNS = ['x1', 'x2', 'mu', 'rate']
POINT_PREDICTION_COLUMNS = ['id', 't', 'value']


def _write(df: pd.DataFrame, path) -> pd.DataFrame:
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    df.to_csv(path, index=False)
    logger.info("Wrote %d row(s) to %s", len(df), path)
    return df


def training_trace_table(ensemble: Ensemble) -> pd.DataFrame:
    """Training loss after 0, 1, ..., K trees."""
    loss = ensemble.training_loss
    return pd.DataFrame({'tree': np.arange(len(loss)), 'training_loss': loss}, columns=TRACE_COLUMNS)


def leaves_table(ensemble: Ensemble) -> pd.DataFrame:
    leaves = ensemble.leaves_per_tree
    return pd.DataFrame({'tree': np.arange(1, len(leaves) + 1), 'leaves': leaves}, columns=LEAVES_COLUMNS)


def importance_table(ensemble: Ensemble) -> pd.DataFrame:
    """Raw (gain / K^2) and min-max standardized importance per static feature."""
    return pd.DataFrame({
        'feature': [f"x{k}" for k in range(1, ensemble.p + 1)],
        'raw': feature_importance(ensemble),
        'standardized': feature_importance(ensemble, standardize=True),
    }, columns=IMPORTANCE_COLUMNS)


def partition_table(ensemble: Ensemble) -> pd.DataFrame:
    """
    Rectangle of every leaf of every tree, one row per (tree, leaf, feature).

    A leaf holds x with lower < x <= upper; unbounded sides are written as
    -inf and inf.
    """
    rows = []
    for t, tree in enumerate(ensemble.trees, start=1):
        for leaf, (lower, upper) in enumerate(tree.leaf_regions(ensemble.p), start=1):
            for f in range(ensemble.p):
                rows.append({'tree': t, 'leaf': leaf, 'feature': f"x{f + 1}",
                             'lower': lower[f], 'upper': upper[f]})
    return pd.DataFrame(rows, columns=PARTITION_COLUMNS)


def leaf_curves_table(ensemble: EnsembleStatic) -> pd.DataFrame:
    if isinstance(ensemble, EnsembleDynamic):
        raise UnsupportedOperationError("leaf curves exist only for static models; export the beta map instead")
    points = ensemble.grid.points
    frames = [
        pd.DataFrame({'tree': t, 'leaf': leaf, 't': points, 'value': node.value.values})
        for t, tree in enumerate(ensemble.trees, start=1)
        for leaf, node in enumerate(tree.leaves, start=1)
    ]
    if not frames:
        return pd.DataFrame(columns=LEAF_CURVE_COLUMNS)
    return pd.concat(frames, ignore_index=True)[LEAF_CURVE_COLUMNS]


def surface_table(ensemble: EnsembleStatic, t_eval: Optional[float] = None,
                  resolution: int = 20) -> pd.DataFrame:
    """
    Predicted mu(t_eval) and mu(t_eval) / t_eval over a regular grid of the feature plane.

    Cell centres span the training feature ranges (the unit square when
    unknown).
    """
    if isinstance(ensemble, EnsembleDynamic):
        raise UnsupportedOperationError("the surface export needs a static model")
    if ensemble.p != 2:
        raise UnsupportedOperationError(f"the surface export needs exactly 2 static features, got {ensemble.p}")
    t_eval = ensemble.grid.t_max if t_eval is None else float(t_eval)
    ranges = ensemble.feature_ranges if ensemble.feature_ranges is not None else np.array([[0.0, 1.0]] * 2)
    centres = [lo + (np.arange(resolution) + 0.5) * (hi - lo) / resolution for lo, hi in ranges]
    x1, x2 = np.meshgrid(centres[0], centres[1], indexing='ij')
    X = np.column_stack([x1.ravel(), x2.ravel()])
    predictions = ensemble.predict_matrix(X)
    mu = np.array([Curve(ensemble.grid, row).at(t_eval) for row in predictions], dtype=float)
    return pd.DataFrame({'x1': X[:, 0], 'x2': X[:, 1], 'mu': mu, 'rate': mu / t_eval},
                        columns=SURFACE_COLUMNS)


def point_predictions_table(values: Mapping[str, np.ndarray], times: Sequence[float]) -> pd.DataFrame:
    times = np.asarray(times, dtype=float)
    rows = [{'id': ident, 't': t, 'value': float(v)}
            for ident, row in values.items() for t, v in zip(times, row)]
    return pd.DataFrame(rows, columns=POINT_PREDICTION_COLUMNS)


def export_training(ensemble: Ensemble, out_dir) -> Dict[str, str]:
    """Training trace and leaves-per-tree tables written next to a saved model."""
    paths = {
        'trace': os.path.join(out_dir, 'training_trace.csv'),
        'leaves': os.path.join(out_dir, 'leaves_per_tree.csv'),
    }
    _write(training_trace_table(ensemble), paths['trace'])
    _write(leaves_table(ensemble), paths['leaves'])
    return paths


def export_importance(ensemble: Ensemble, path) -> pd.DataFrame:
    return _write(importance_table(ensemble), path)


def export_predictions(curves: Mapping[str, Curve], path) -> pd.DataFrame:
    return _write(curves_frame(curves), path)


def export_point_predictions(values: Mapping[str, np.ndarray], times: Sequence[float], path) -> pd.DataFrame:
    return _write(point_predictions_table(values, times), path)


EXPORT_KINDS = ('partition', 'leaf-curves', 'surface', 'beta-map')


def export_model_view(ensemble: Ensemble, kind: str, path, t_eval: Optional[float] = None,
                      resolution: int = 20) -> pd.DataFrame:
    """
    Write one of the model views: partition, leaf-curves, surface or beta-map.

    Raises:
        UnsupportedOperationError: when the view does not apply to the model
    """
    if kind == 'partition':
        df = partition_table(ensemble)
    elif kind == 'leaf-curves':
        df = leaf_curves_table(ensemble)
    elif kind == 'surface':
        df = surface_table(ensemble, t_eval, resolution)
    elif kind == 'beta-map':
        if not isinstance(ensemble, EnsembleDynamic):
            raise UnsupportedOperationError("the beta map needs a dynamic model")
        df = beta_by_region_export(ensemble, resolution)
    else:
        raise UnsupportedOperationError(f"unknown export kind {kind!r}; choose from {', '.join(EXPORT_KINDS)}")
    return _write(df, path)


def summary_records(report: MetricReport) -> Dict[str, Dict[str, Dict[str, float]]]:
    """Nested {method: {metric: {stat: value}}} view of a report summary; NaN becomes None."""
    out: Dict[str, Dict[str, Dict[str, float]]] = {}
    for method, row in report.summary.iterrows():
        entry = out.setdefault(str(method), {})
        for (metric, stat), value in row.items():
            entry.setdefault(metric, {})[stat] = None if pd.isna(value) else float(value)
    return out


def export_cv_report(report: MetricReport, out_dir) -> Dict[str, str]:
    """Per-replicate metrics as CSV plus the per-method summary as JSON."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        'per_rep': os.path.join(out_dir, 'cv_per_rep.csv'),
        'summary': os.path.join(out_dir, 'cv_summary.json'),
    }
    _write(report.per_rep, paths['per_rep'])
    with open(paths['summary'], 'w', encoding='utf-8') as handle:
        json.dump(summary_records(report), handle, indent=1, sort_keys=True)
        handle.write('\n')
    return paths


def export_tune_report(report: pd.DataFrame, path) -> pd.DataFrame:
    return _write(report, path)
