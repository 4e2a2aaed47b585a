"""
Command-line interface: simulate, train, predict, evaluate, importance, tune and export.

Every subcommand writes its artifacts to files and prints their paths.
Validation failures exit with status 1 and numerical failures with status 2,
after a single line "error: <ExceptionName>: <reason>" on stderr.
"""

import argparse
import dataclasses
import logging
import os
import sys
from typing import Dict, List, Optional

from src.core.boost_dynamic import EnsembleDynamic, fit_dynamic, predict_dynamic, predict_dynamic_at
from src.core.boost_static import fit_static, predict_static
from src.core.data import Curve, Dataset
from src.core.errors import BoostRError, InvalidArgumentError, NumericalError
from src.core.io import load_dataset_dir, save_dataset
from src.data.dataset_specs import get_static_data
from src.data.simulate import generate
from src.evaluation.validation import cross_validate, lhd_sample, tune
from src.export.csv_exporter import (EXPORT_KINDS, export_cv_report, export_importance, export_model_view,
                                     export_point_predictions, export_predictions, export_training,
                                     export_tune_report)
from src.export.model_store import load_model, save_model
from src.utils.logging_setup import configure_logging
from src.utils.run_config import RunConfig, resolve_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2

MODEL_FILE = 'model.json'

# RunConfig keys that a subcommand may set from its flags
_CONFIG_KEYS = [f.name for f in dataclasses.fields(RunConfig)]


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as InvalidArgumentError instead of exiting."""

    def error(self, message):
        raise InvalidArgumentError(f"{self.prog}: {message}")


def _common_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--config', help='flat key=value run configuration file')
    common.add_argument('--log-level', default='WARNING', help='logging level (default WARNING)')
    common.add_argument('--threads', type=int, help='worker threads (default 1)')
    common.add_argument('--seed', type=int, help='random seed (falls back to BOOSTR_SEED)')
    return common


def _add_boost_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group('boosting')
    group.add_argument('--mode', choices=['static', 'dynamic'])
    group.add_argument('--K', type=int, help='number of trees')
    group.add_argument('--gamma1', type=float, help='penalty per additional leaf')
    group.add_argument('--gamma2', type=float, help='leaf ridge / group-lasso penalty')
    group.add_argument('--d-max', type=int, help='leaf cap checked before each level')
    group.add_argument('--min-leaf', type=int, help='minimum individuals per leaf')
    group.add_argument('--max-thresholds', type=int, help='candidate thresholds per feature')
    group.add_argument('--learning-rate', type=float, help='shrinkage of each tree')
    group.add_argument('--u', type=int, help='internal spline knots (dynamic mode)')
    group.add_argument('--v', type=int, help='spline order parameter, degree v-1 (dynamic mode)')
    group.add_argument('--m', type=int, help='grid points')
    group.add_argument('--t-max', type=float, help='grid horizon (default: largest censoring time)')


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = _Parser(prog='boostr', description='Boosted additive trees for recurrent events.')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', parents=[common], help='write a simulated dataset')
    p.add_argument('--name', '--dataset', dest='name', required=True,
                   choices=['A', 'B', 'C', 'D', 'morvita', 'planted'])
    p.add_argument('--n', type=int, help='number of individuals (default per dataset)')
    p.add_argument('--sigma', type=float, default=0.0, help='random-effect sd (morvita)')
    p.add_argument('--out', '--out-dir', dest='out', help='output directory')

    p = sub.add_parser('train', parents=[common], help='fit a model')
    p.add_argument('--dataset', help='dataset directory')
    p.add_argument('--out', help='output directory for the model and training tables')
    p.add_argument('--progress', action='store_true')
    _add_boost_flags(p)

    p = sub.add_parser('predict', parents=[common], help='predict cumulative intensity curves')
    p.add_argument('--model', help='model JSON')
    p.add_argument('--dataset', help='dataset directory with the individuals to predict')
    p.add_argument('--out', help='output CSV')
    p.add_argument('--times', type=_float_list, help='comma-separated times instead of the grid')
    p.add_argument('--clamp', action='store_true', help='set negative predictions to zero')

    p = sub.add_parser('evaluate', parents=[common], help='repeated train/test comparison')
    p.add_argument('--dataset', help='dataset directory')
    p.add_argument('--dataset-name', help='name of a simulated dataset (A-D) for the oracle method')
    p.add_argument('--methods', default='boostr,mcf', help='comma-separated methods')
    p.add_argument('--reps', type=int, default=50)
    p.add_argument('--train-size', type=int, default=150)
    p.add_argument('--test-size', type=int, default=50)
    p.add_argument('--t-eval', type=float, help='evaluation time (default: grid horizon)')
    p.add_argument('--knn-k', type=int, default=20)
    p.add_argument('--time-learning-rate', type=float, help='learning rate of the time-feature booster')
    p.add_argument('--out', help='output directory for the reports')
    p.add_argument('--progress', action='store_true')
    _add_boost_flags(p)

    p = sub.add_parser('importance', parents=[common], help='feature importance of a model')
    p.add_argument('--model', help='model JSON')
    p.add_argument('--out', help='output CSV')

    p = sub.add_parser('tune', parents=[common], help='Latin hypercube search over gamma1 and gamma2')
    p.add_argument('--dataset', help='dataset directory')
    p.add_argument('--runs', type=int, help='design runs (default 15)')
    p.add_argument('--gamma1-range', type=_float_list, help='lo,hi (default 0,600)')
    p.add_argument('--gamma2-range', type=_float_list, help='lo,hi (default 0,200)')
    p.add_argument('--out', help='output CSV')
    p.add_argument('--progress', action='store_true')
    _add_boost_flags(p)

    p = sub.add_parser('export', parents=[common], help='write a model view as CSV')
    p.add_argument('kind', choices=EXPORT_KINDS)
    p.add_argument('--model', help='model JSON')
    p.add_argument('--out', help='output CSV')
    p.add_argument('--t-eval', type=float, help='evaluation time of the surface (default: grid horizon)')
    p.add_argument('--resolution', type=int, default=20, help='cells per axis for surface and beta-map')
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key) for key in _CONFIG_KEYS if hasattr(args, key)}
    return resolve_config(args.config, overrides)


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise InvalidArgumentError(f"{flag} is required (flag or config file)")
    return value


def _load(config: RunConfig) -> Dataset:
    return load_dataset_dir(_require(config.dataset, '--dataset'), m=config.m, t_max=config.t_max)


def cmd_simulate(args, config: RunConfig) -> Dict[str, str]:
    dataset = generate(args.name, n=args.n, seed=config.seed, sigma=args.sigma)
    return save_dataset(dataset, _require(config.out, '--out'))


def cmd_train(args, config: RunConfig) -> Dict[str, str]:
    dataset = _load(config)
    boost = config.boost_config()
    if config.mode == 'dynamic':
        ensemble = fit_dynamic(dataset, boost, config.u, config.v, progress=args.progress)
    else:
        ensemble = fit_static(dataset, boost, progress=args.progress)
    out_dir = _require(config.out, '--out')
    paths = {'model': save_model(ensemble, os.path.join(out_dir, MODEL_FILE))}
    paths.update(export_training(ensemble, out_dir))
    return paths


def cmd_predict(args, config: RunConfig) -> Dict[str, str]:
    ensemble = load_model(_require(config.model, '--model'))
    dataset = load_dataset_dir(_require(config.dataset, '--dataset'), m=ensemble.grid.m)
    out = _require(config.out, '--out')
    dynamic = isinstance(ensemble, EnsembleDynamic)

    if args.times is not None:
        values = {}
        for ind in dataset.individuals:
            if dynamic:
                row = predict_dynamic_at(ensemble, ind.x, ind.z, args.times)
            else:
                row = predict_static(ensemble, ind.x).at(args.times)
            values[ind.id] = row.clip(min=0.0) if args.clamp else row
        export_point_predictions(values, args.times, out)
        return {'predictions': out}

    curves: Dict[str, Curve] = {}
    for ind in dataset.individuals:
        if dynamic:
            curves[ind.id] = predict_dynamic(ensemble, ind.x, ind.z, clamp=args.clamp)
        else:
            curves[ind.id] = predict_static(ensemble, ind.x, clamp=args.clamp)
    export_predictions(curves, out)
    return {'predictions': out}


def cmd_evaluate(args, config: RunConfig) -> Dict[str, str]:
    dataset = _load(config)
    if args.dataset_name:
        dataset = dataclasses.replace(dataset, name=args.dataset_name)
    methods = [name.strip() for name in args.methods.split(',') if name.strip()]
    boost = config.boost_config()
    time_config = None
    if args.time_learning_rate is not None:
        time_config = dataclasses.replace(boost, learning_rate=args.time_learning_rate)
    report = cross_validate(dataset, methods, boost, split=(args.train_size, args.test_size), reps=args.reps,
                            seed=config.seed, t_eval=args.t_eval, knn_k=args.knn_k, time_config=time_config,
                            n_jobs=config.threads, progress=args.progress)
    return export_cv_report(report, _require(config.out, '--out'))


def cmd_importance(args, config: RunConfig) -> Dict[str, str]:
    ensemble = load_model(_require(config.model, '--model'))
    out = _require(config.out, '--out')
    export_importance(ensemble, out)
    return {'importance': out}


def cmd_tune(args, config: RunConfig) -> Dict[str, str]:
    if config.mode == 'dynamic':
        raise InvalidArgumentError("tune supports static mode only")
    settings = get_static_data()[3]
    ranges = []
    for given, default, flag in ((args.gamma1_range, settings['gamma1_range'], '--gamma1-range'),
                                 (args.gamma2_range, settings['gamma2_range'], '--gamma2-range')):
        lo_hi = tuple(given) if given is not None else default
        if len(lo_hi) != 2 or not 0 <= lo_hi[0] <= lo_hi[1]:
            raise InvalidArgumentError(f"{flag} must be lo,hi with 0 <= lo <= hi")
        ranges.append(lo_hi)
    design = lhd_sample(ranges, args.runs or settings['n_runs'], seed=config.seed)
    report = tune(_load(config), design, config.boost_config(), n_jobs=config.threads, progress=args.progress)
    out = _require(config.out, '--out')
    export_tune_report(report, out)
    return {'tune': out}


def cmd_export(args, config: RunConfig) -> Dict[str, str]:
    ensemble = load_model(_require(config.model, '--model'))
    out = _require(config.out, '--out')
    export_model_view(ensemble, args.kind, out, t_eval=args.t_eval, resolution=args.resolution)
    return {args.kind: out}


COMMANDS = {
    'simulate': cmd_simulate,
    'train': cmd_train,
    'predict': cmd_predict,
    'evaluate': cmd_evaluate,
    'importance': cmd_importance,
    'tune': cmd_tune,
    'export': cmd_export,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit status."""
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        config = _run_config(args)
        paths = COMMANDS[args.command](args, config)
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BoostRError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return EXIT_OK
