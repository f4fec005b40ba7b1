"""
Logging setup
"""
import logging
import sys
from pathlib import Path
from typing import Optional

from .config import settings


def setup_logger(
    name: str = "mppi",
    log_level: str = "INFO",
    log_file: Optional[str] = None
) -> logging.Logger:
    """
    Configure a named logger once.

    Args:
        name: logger name
        log_level: DEBUG, INFO, WARNING, ERROR or CRITICAL
        log_file: optional path of a UTF-8 log file (gets DEBUG records)

    Returns:
        the configured logger
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, log_level.upper()))

    # handlers are attached only on first call
    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # console goes to stderr so that --json on stdout stays parseable
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(getattr(logging, log_level.upper()))
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
        # file handler needs DEBUG records to reach it
        logger.setLevel(logging.DEBUG)

    return logger


def set_level(log_level: str) -> None:
    """Change the level of the package logger and its console handler."""
    level = getattr(logging, log_level.upper())
    has_file = False
    for handler in logger.handlers:
        if isinstance(handler, logging.FileHandler):
            has_file = True
        else:
            handler.setLevel(level)
    if not has_file:
        logger.setLevel(level)


logger = setup_logger(log_level=settings.log_level, log_file=settings.log_file)
