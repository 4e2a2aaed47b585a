"""
CSV input and output for datasets and curves.

File formats (headers are fixed):
    events.csv   id,time,kind      one row per event plus one censor row per id
    static.csv   id,x1,...,xp
    dynamic.csv  id,feature,time,value   feature is 1-based
    curves.csv   id,t,value,masked       masked is true after censoring
"""

import logging
import os
from typing import Dict, List, Mapping, Optional, Set

import numpy as np
import pandas as pd

from src.core.data import Curve, Dataset, DynamicSeries, EventHistory, Individual, build_grid
from src.core.errors import DataFormatError

logger = logging.getLogger(__name__)

EVENTS_FILE = 'events.csv'
STATIC_FILE = 'static.csv'
DYNAMIC_FILE = 'dynamic.csv'

DEFAULT_GRID_SIZE = 100


def _read_csv(path, required: List[str]) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={'id': str}, float_precision='round_trip')
    missing = [col for col in required if col not in df.columns]
    if missing:
        raise DataFormatError(path, None, f"missing column(s) {', '.join(missing)}")
    if df['id'].isna().any():
        raise DataFormatError(path, int(np.flatnonzero(df['id'].isna().to_numpy())[0]), "missing id")
    df['id'] = df['id'].str.strip()
    return df.reset_index(drop=True)


def _numeric(df: pd.DataFrame, column: str, path) -> np.ndarray:
    values = pd.to_numeric(df[column], errors='coerce').to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DataFormatError(path, int(bad[0]), f"{column} is not a finite number: {df[column].iloc[bad[0]]!r}")
    return values


def _read_events(path) -> Dict[str, EventHistory]:
    df = _read_csv(path, ['id', 'time', 'kind'])
    times = _numeric(df, 'time', path)
    kinds = df['kind'].astype(str).str.strip().to_numpy()
    unknown = np.flatnonzero(~np.isin(kinds, ['event', 'censor']))
    if unknown.size:
        raise DataFormatError(path, int(unknown[0]), f"kind must be 'event' or 'censor', got {kinds[unknown[0]]!r}")

    histories = {}
    groups = df.groupby('id', sort=False).indices
    for ident in pd.unique(df['id']):
        rows = groups[ident]
        censor_rows = rows[kinds[rows] == 'censor']
        if censor_rows.size == 0:
            raise DataFormatError(path, int(rows[0]), f"id {ident} has no censor row")
        if censor_rows.size > 1:
            raise DataFormatError(path, int(censor_rows[1]), f"id {ident} has more than one censor row")
        censor = times[censor_rows[0]]
        if censor <= 0:
            raise DataFormatError(path, int(censor_rows[0]), f"censoring time must be positive, got {censor}")

        event_rows = rows[kinds[rows] == 'event']
        event_times = times[event_rows]
        non_positive = np.flatnonzero(event_times <= 0)
        if non_positive.size:
            raise DataFormatError(path, int(event_rows[non_positive[0]]), "event time must be positive")
        unsorted = np.flatnonzero(np.diff(event_times) <= 0)
        if unsorted.size:
            raise DataFormatError(path, int(event_rows[unsorted[0] + 1]),
                                  f"event times for id {ident} are not strictly ascending")
        late = np.flatnonzero(event_times > censor)
        if late.size:
            raise DataFormatError(path, int(event_rows[late[0]]),
                                  f"event at {event_times[late[0]]} is after the censoring time {censor}")
        histories[ident] = EventHistory(event_times, censor)
    return histories


def _read_static(path, ids: Set[str]) -> Dict[str, np.ndarray]:
    df = _read_csv(path, ['id'])
    feature_cols = [col for col in df.columns if col != 'id']
    expected = [f"x{k}" for k in range(1, len(feature_cols) + 1)]
    if feature_cols != expected:
        raise DataFormatError(path, None, f"feature columns must be {','.join(expected)}")
    X = np.column_stack([_numeric(df, col, path) for col in feature_cols]) if feature_cols \
        else np.zeros((len(df), 0))

    features = {}
    for row, ident in enumerate(df['id']):
        if ident in features:
            raise DataFormatError(path, row, f"duplicate id {ident}")
        if ident not in ids:
            raise DataFormatError(path, row, f"id {ident} has no rows in the events file")
        features[ident] = X[row]
    missing = sorted(ident for ident in ids if ident not in features)
    if missing:
        raise DataFormatError(path, None, f"no static features for id {missing[0]}")
    return features


def _read_dynamic(path, ids: List[str]) -> Dict[str, List[DynamicSeries]]:
    df = _read_csv(path, ['id', 'feature', 'time', 'value'])
    feature = _numeric(df, 'feature', path)
    times = _numeric(df, 'time', path)
    values = _numeric(df, 'value', path)
    bad = np.flatnonzero((feature < 1) | (feature != np.round(feature)))
    if bad.size:
        raise DataFormatError(path, int(bad[0]), "feature must be a 1-based integer index")
    negative = np.flatnonzero(times < 0)
    if negative.size:
        raise DataFormatError(path, int(negative[0]), "dynamic sample time must be non-negative")
    feature = feature.astype(int)
    q = int(feature.max()) if feature.size else 0

    grouped = pd.DataFrame({'id': df['id'], 'feature': feature}).groupby(['id', 'feature'], sort=False).indices
    series = {ident: [None] * q for ident in ids}
    for (ident, l), rows in grouped.items():
        if ident not in series:
            raise DataFormatError(path, int(rows[0]), f"id {ident} has no rows in the events file")
        unsorted = np.flatnonzero(np.diff(times[rows]) <= 0)
        if unsorted.size:
            raise DataFormatError(path, int(rows[unsorted[0] + 1]),
                                  f"sample times for id {ident}, feature {l} are not strictly ascending")
        if times[rows[0]] != 0:
            raise DataFormatError(path, int(rows[0]),
                                  f"sample times for id {ident}, feature {l} must start at 0, got {times[rows[0]]:g}")
        series[ident][l - 1] = DynamicSeries(times[rows], values[rows])
    for ident, per_feature in series.items():
        if any(s is None for s in per_feature):
            l = per_feature.index(None) + 1
            raise DataFormatError(path, None, f"id {ident} has no samples for dynamic feature {l}")
    return series


def load_dataset(events_path, static_path, dynamic_path=None, m: int = DEFAULT_GRID_SIZE,
                 t_max: Optional[float] = None, name: Optional[str] = None) -> Dataset:
    """
    Load and validate a dataset from its CSV files.

    Args:
        events_path: Path of the events CSV
        static_path: Path of the static features CSV
        dynamic_path: Optional path of the dynamic features CSV
        m: Grid size
        t_max: Grid horizon (defaults to the largest censoring time)
        name: Optional dataset name

    Returns:
        Dataset with q = 0 when no dynamic file is given
    """
    histories = _read_events(events_path)
    ids = list(histories)
    features = _read_static(static_path, set(ids))
    dynamic = _read_dynamic(dynamic_path, ids) if dynamic_path is not None else {}

    individuals = tuple(
        Individual(ident, features[ident], histories[ident], tuple(dynamic.get(ident, ())))
        for ident in ids
    )
    if t_max is None:
        t_max = max(h.censor for h in histories.values())
    dataset = Dataset(individuals, build_grid(t_max, m), name)
    logger.info("Loaded %d individuals (p=%d, q=%d) from %s", dataset.n, dataset.p, dataset.q, events_path)
    return dataset


def load_dataset_dir(directory, m: int = DEFAULT_GRID_SIZE, t_max: Optional[float] = None) -> Dataset:
    """Load a dataset written by save_dataset; dynamic.csv is optional."""
    dynamic_path = os.path.join(directory, DYNAMIC_FILE)
    return load_dataset(
        os.path.join(directory, EVENTS_FILE),
        os.path.join(directory, STATIC_FILE),
        dynamic_path if os.path.exists(dynamic_path) else None,
        m=m, t_max=t_max, name=os.path.basename(os.path.normpath(directory)),
    )


def save_dataset(dataset: Dataset, out_dir) -> Dict[str, str]:
    """
    Write a dataset as events.csv, static.csv and (when q > 0) dynamic.csv.

    Returns:
        Mapping of file kind to written path
    """
    os.makedirs(out_dir, exist_ok=True)
    event_rows, static_rows, dynamic_rows = [], [], []
    for ind in dataset.individuals:
        for t in ind.events.times:
            event_rows.append({'id': ind.id, 'time': float(t), 'kind': 'event'})
        event_rows.append({'id': ind.id, 'time': ind.events.censor, 'kind': 'censor'})

        row = {'id': ind.id}
        row.update({f"x{k + 1}": float(value) for k, value in enumerate(ind.x)})
        static_rows.append(row)

        for l, series in enumerate(ind.z, start=1):
            for t, value in zip(series.times, series.values):
                dynamic_rows.append({'id': ind.id, 'feature': l, 'time': float(t), 'value': float(value)})

    paths = {
        'events': os.path.join(out_dir, EVENTS_FILE),
        'static': os.path.join(out_dir, STATIC_FILE),
    }
    pd.DataFrame(event_rows, columns=['id', 'time', 'kind']).to_csv(paths['events'], index=False)
    static_columns = ['id'] + [f"x{k}" for k in range(1, dataset.p + 1)]
    pd.DataFrame(static_rows, columns=static_columns).to_csv(paths['static'], index=False)
    if dataset.q:
        paths['dynamic'] = os.path.join(out_dir, DYNAMIC_FILE)
        pd.DataFrame(dynamic_rows, columns=['id', 'feature', 'time', 'value']).to_csv(paths['dynamic'], index=False)
    logger.info("Wrote dataset with %d individuals to %s", dataset.n, out_dir)
    return paths


def curves_frame(curves: Mapping[str, Curve]) -> pd.DataFrame:
    """Long-format table id,t,value,masked of a set of curves."""
    frames = []
    for ident, curve in curves.items():
        frames.append(pd.DataFrame({
            'id': ident,
            't': curve.grid.points,
            'value': curve.values,
            'masked': ~curve.mask,
        }))
    if not frames:
        return pd.DataFrame(columns=['id', 't', 'value', 'masked'])
    return pd.concat(frames, ignore_index=True)


def save_curves(curves: Mapping[str, Curve], path) -> str:
    """Write curves in the id,t,value,masked format."""
    curves_frame(curves).to_csv(path, index=False)
    return str(path)
