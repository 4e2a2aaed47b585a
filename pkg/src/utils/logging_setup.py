"""
Logging configuration for command-line runs.
"""

import logging
from typing import Optional, Union

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
PACKAGE_LOGGER = 'src'

_handler: Optional[logging.Handler] = None


def configure_logging(level: Union[str, int] = 'WARNING') -> logging.Logger:
    """Attach one stream handler to the package logger; calling again only changes the level."""
    global _handler
    if isinstance(level, str):
        name = level.upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            raise ValueError(f"unknown log level {name!r}")
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level)
    if _handler is None:
        _handler = logging.StreamHandler()
        _handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(_handler)
    return logger
