"""
JSON persistence of fitted ensembles.

Trees are stored as preorder node lists. Floats are written with their
shortest round-trip representation, so a saved model predicts exactly what
the in-memory model does. The worker count is not part of the saved
configuration; models trained with any number of threads serialise to the
same bytes.
"""

import json
import logging
import os
from typing import Dict, Iterator, List, Union

import numpy as np

from src.core.boost_dynamic import EnsembleDynamic, LeafSplineModel
from src.core.boost_static import BoostConfig, EnsembleStatic
from src.core.data import Curve, TimeGrid
from src.core.errors import ModelFormatError
from src.core.splines import SplineBasis
from src.core.trees import Node, SplitRule, Tree

logger = logging.getLogger(__name__)

STATIC_FORMAT = "boostr-static-v1"
DYNAMIC_FORMAT = "boostr-dynamic-v1"

Ensemble = Union[EnsembleStatic, EnsembleDynamic]


def _floats(values) -> List:
    return np.asarray(values, dtype=float).tolist()


def _leaf_payload(value) -> Dict:
    if isinstance(value, Curve):
        return {"values": _floats(value.values)}
    return {"beta": _floats(value.beta), "sweeps": value.sweeps,
            "kkt_residual": value.kkt_residual, "converged": value.converged}


def _tree_to_nodes(tree: Tree) -> List[Dict]:
    nodes = []
    for node in tree.root.preorder():
        if node.is_leaf:
            nodes.append({"kind": "leaf", **_leaf_payload(node.value)})
        else:
            nodes.append({"kind": "split", "feature": node.rule.feature,
                          "threshold": node.rule.threshold, "gain": node.gain})
    return nodes


def _nodes_to_tree(nodes: List[Dict], make_leaf) -> Tree:
    stream: Iterator[Dict] = iter(nodes)

    def build() -> Node:
        try:
            entry = next(stream)
        except StopIteration:
            raise ModelFormatError("tree node list ends early") from None
        if entry["kind"] == "leaf":
            return Node(value=make_leaf(entry))
        if entry["kind"] != "split":
            raise ModelFormatError(f"unknown node kind {entry['kind']!r}")
        node = Node(rule=SplitRule(int(entry["feature"]), float(entry["threshold"])),
                    gain=float(entry["gain"]))
        node.left = build()
        node.right = build()
        return node

    root = build()
    if next(stream, None) is not None:
        raise ModelFormatError("tree node list has trailing nodes")
    return Tree(root)


def model_to_dict(ensemble: Ensemble) -> Dict:
    config = ensemble.config.to_dict()
    config.pop("n_jobs")
    document = {
        "format": DYNAMIC_FORMAT if isinstance(ensemble, EnsembleDynamic) else STATIC_FORMAT,
        "config": config,
        "grid": {"t_max": ensemble.grid.t_max, "m": ensemble.grid.m},
        "p": ensemble.p,
        "feature_ranges": None if ensemble.feature_ranges is None else _floats(ensemble.feature_ranges),
        "importance_raw": _floats(ensemble.importance_raw),
        "training_loss": _floats(ensemble.training_loss),
        "trees": [_tree_to_nodes(tree) for tree in ensemble.trees],
    }
    if isinstance(ensemble, EnsembleDynamic):
        document["bases"] = [{"u": b.u, "v": b.v, "knots": _floats(b.knots)} for b in ensemble.bases]
    return document


def model_from_dict(document: Dict) -> Ensemble:
    kind = document.get("format")
    if kind not in (STATIC_FORMAT, DYNAMIC_FORMAT):
        raise ModelFormatError(f"unsupported model format {kind!r}")
    try:
        config = BoostConfig.from_dict(document["config"])
        grid = TimeGrid(float(document["grid"]["t_max"]), int(document["grid"]["m"]))
        p = int(document["p"])
        ranges = document.get("feature_ranges")
        common = dict(
            importance_raw=np.array(document["importance_raw"], dtype=float),
            training_loss=[float(v) for v in document["training_loss"]],
            feature_ranges=None if ranges is None else np.array(ranges, dtype=float),
        )
        if kind == STATIC_FORMAT:
            trees = [_nodes_to_tree(nodes, lambda e: Curve(grid, e["values"])) for nodes in document["trees"]]
            return EnsembleStatic(grid, config, p, trees, **common)

        bases = tuple(SplineBasis(int(b["u"]), int(b["v"]), b["knots"]) for b in document["bases"])

        def spline_leaf(entry: Dict) -> LeafSplineModel:
            return LeafSplineModel(entry["beta"], int(entry["sweeps"]),
                                   float(entry["kkt_residual"]), bool(entry["converged"]))

        trees = [_nodes_to_tree(nodes, spline_leaf) for nodes in document["trees"]]
        return EnsembleDynamic(grid, config, bases, p, trees, **common)
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed {kind} model: {exc!r}") from exc


def save_model(ensemble: Ensemble, path) -> str:
    """Write a fitted ensemble as JSON; returns the path."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(model_to_dict(ensemble), handle, indent=1, sort_keys=True)
        handle.write('\n')
    logger.info("Saved model with %d trees to %s", len(ensemble.trees), path)
    return str(path)


def load_model(path) -> Ensemble:
    """Read a model written by save_model, checking its format string."""
    try:
        with open(path, encoding='utf-8') as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc.msg})") from exc
    if not isinstance(document, dict):
        raise ModelFormatError(f"{path}: expected a JSON object")
    return model_from_dict(document)
