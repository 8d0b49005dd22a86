import logging
import sys

PACKAGE_LOGGER = "whitespace_modules"
LOG_FORMAT = "[%(levelname)s] %(message)s"


def setup_logging(verbose=False):
    """
    Attach one console handler to the package logger.
    Lines come out as "[INFO] ...", "[ERROR] ...". Calling it again only
    changes the level.
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    if not any(getattr(h, "_whitespace_handler", False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._whitespace_handler = True
        logger.addHandler(handler)

    return logger
