"""
Run configuration for the command line.
Resolves every run parameter from defaults, a key=value file and flags.
"""

import logging
import os
from dataclasses import dataclass, fields
from typing import Any, Dict, Mapping, Optional

from src.core.boost_static import BoostConfig
from src.core.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

SEED_ENV = 'BOOSTR_SEED'


@dataclass(frozen=True)
class RunConfig:
    """Resolved parameters of one command-line run."""
    mode: str = 'static'
    K: int = 50
    gamma1: float = 0.0
    gamma2: float = 0.0
    d_max: int = 4
    min_leaf: int = 5
    max_thresholds: int = 32
    learning_rate: float = 1.0
    u: int = 2
    v: int = 3
    m: int = 100
    t_max: Optional[float] = None
    seed: int = 0
    threads: int = 1
    dataset: Optional[str] = None
    model: Optional[str] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ('static', 'dynamic'):
            raise InvalidArgumentError(f"mode must be static or dynamic, got {self.mode!r}")
        if self.mode == 'dynamic' and (self.u < 0 or self.v < 1):
            raise InvalidArgumentError(f"dynamic mode needs u >= 0 and v >= 1, got u={self.u}, v={self.v}")
        if self.m < 2:
            raise InvalidArgumentError(f"m must be >= 2, got {self.m}")
        if self.t_max is not None and self.t_max <= 0:
            raise InvalidArgumentError(f"t_max must be positive, got {self.t_max}")
        if self.threads < 1:
            raise InvalidArgumentError(f"threads must be >= 1, got {self.threads}")
        self.boost_config()

    def boost_config(self) -> BoostConfig:
        return BoostConfig(K=self.K, gamma1=self.gamma1, gamma2=self.gamma2, d_max=self.d_max,
                           min_leaf=self.min_leaf, max_thresholds=self.max_thresholds, seed=self.seed,
                           learning_rate=self.learning_rate, n_jobs=self.threads)


# Define all defaults in one place
DEFAULTS: Dict[str, Any] = {f.name: f.default for f in fields(RunConfig)}

_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    kind = _TYPES[key]
    text = raw.strip()
    try:
        if kind is int:
            return int(text)
        if kind is float or kind == Optional[float]:
            return None if text.lower() in ('', 'none') else float(text)
    except ValueError:
        raise InvalidArgumentError(f"{key}: cannot parse {raw!r}") from None
    return text or None if kind == Optional[str] else text


def read_config_file(path) -> Dict[str, str]:
    """
    Parse a flat key=value file.

    Blank lines and lines starting with # are skipped; keys may use dashes
    or underscores.

    Raises:
        InvalidArgumentError: malformed lines or unknown keys
    """
    values = {}
    with open(path, encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise InvalidArgumentError(f"{path}: line {number}: expected key=value")
            key, value = (part.strip() for part in line.split('=', 1))
            key = key.replace('-', '_')
            if key not in DEFAULTS:
                raise InvalidArgumentError(f"{path}: line {number}: unknown key {key!r}")
            values[key] = value
    return values


def resolve_config(config_path=None, overrides: Optional[Mapping[str, Any]] = None,
                   environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """
    DEFAULTS, then the config file, then non-None overrides.

    The seed falls back to the BOOSTR_SEED environment variable when neither
    the file nor the overrides set it.
    """
    environ = os.environ if environ is None else environ
    values = dict(DEFAULTS)
    sources = {}
    if config_path is not None:
        file_values = read_config_file(config_path)
        values.update(file_values)
        sources.update(dict.fromkeys(file_values, 'file'))
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise InvalidArgumentError(f"unknown setting {key!r}")
        if value is not None:
            values[key] = value
            sources[key] = 'flag'
    if 'seed' not in sources and environ.get(SEED_ENV):
        values['seed'] = environ[SEED_ENV]
        logger.info("Using seed %s from %s", environ[SEED_ENV], SEED_ENV)
    return RunConfig(**{key: _coerce(key, value) for key, value in values.items()})
