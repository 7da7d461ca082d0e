"""Logger setup shared by the command line and the library."""

import logging
import sys


LOG_FORMAT = "[%(asctime)s %(levelname)s %(name)s] %(message)s"


def set_logger(logger: logging.Logger, level: int = logging.WARNING) -> None:
    """Attach a single stderr handler to ``logger`` and set its level.

    Calling it again replaces the handler installed by the previous call.

    Args:
        logger: Logger to configure, usually the ``clozecheck`` root logger.
        level: Logging level for the logger and its handler.
    """
    for handler in list(logger.handlers):
        if getattr(handler, "_clozecheck", False):
            logger.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._clozecheck = True  # type: ignore[attr-defined]
    handler.setLevel(level)
    logger.addHandler(handler)
    logger.setLevel(level)


def verbosity_to_level(verbose: int) -> int:
    """Map a ``-v`` counter to a logging level (0 → WARNING, 1 → INFO, 2+ → DEBUG)."""
    return max(logging.DEBUG, logging.WARNING - 10 * verbose)
