"""
Centralized logging for the GHZ fidelity estimation toolkit.

Usage:
    from utils.logger import get_logger

    logger = get_logger(__name__)
    logger.info("Sweep started")
    logger.debug("Per-trial details")
    logger.warning("Something might be wrong")
    logger.error("An oracle failed", exc_info=True)

Environment:
    GHZ_FIDELITY_LOG_LEVEL    DEBUG | INFO | WARNING | ERROR (default INFO)
    GHZ_FIDELITY_DEBUG        "1" forces DEBUG
    GHZ_FIDELITY_LOG_TO_FILE  "0" disables the dated file under logs/
"""

import logging
import os
import sys
from datetime import datetime
from pathlib import Path

# Log levels
DEBUG = logging.DEBUG
INFO = logging.INFO
WARNING = logging.WARNING
ERROR = logging.ERROR
CRITICAL = logging.CRITICAL


class ColoredFormatter(logging.Formatter):
    """Formatter with ANSI colors on the level name (console only)."""

    COLORS = {
        'DEBUG': '\033[36m',      # Cyan
        'INFO': '\033[32m',       # Green
        'WARNING': '\033[33m',    # Yellow
        'ERROR': '\033[31m',      # Red
        'CRITICAL': '\033[35m',   # Magenta
        'RESET': '\033[0m'
    }

    def format(self, record):
        # Color a copy so the file handler keeps the plain level name
        record = logging.makeLogRecord(record.__dict__)
        levelname = record.levelname
        if levelname in self.COLORS:
            record.levelname = f"{self.COLORS[levelname]}{levelname}{self.COLORS['RESET']}"
        return super().format(record)


def setup_logging(level=None, log_to_file=None, log_dir='logs'):
    """
    Configure logging for the whole toolkit.

    Console output goes to stderr so that CLI result lines on stdout stay
    machine-readable.

    Args:
        level: Logging level. If None, read from GHZ_FIDELITY_LOG_LEVEL.
        log_to_file: Write a dated log file. If None, read from
                     GHZ_FIDELITY_LOG_TO_FILE (default on).
        log_dir: Directory for log files.

    Returns:
        The configured root logger.
    """
    if level is None:
        env_level = os.getenv('GHZ_FIDELITY_LOG_LEVEL', 'INFO').upper()
        level = getattr(logging, env_level, logging.INFO)

    if log_to_file is None:
        log_to_file = os.getenv('GHZ_FIDELITY_LOG_TO_FILE', '1') != '0'

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Drop our own handlers from a previous call; leave foreign ones (pytest caplog)
    for handler in list(root_logger.handlers):
        if getattr(handler, '_ghz_fidelity', False):
            root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(ColoredFormatter(
        fmt='%(levelname)s [%(name)s] %(message)s',
        datefmt='%H:%M:%S'
    ))
    console_handler._ghz_fidelity = True
    root_logger.addHandler(console_handler)

    if log_to_file:
        log_path = Path(log_dir)
        try:
            log_path.mkdir(exist_ok=True)
            log_file = log_path / f"ghz_fidelity_{datetime.now():%Y%m%d}.log"
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
        except OSError as e:
            root_logger.warning(f"⚠️  File logging disabled ({log_path}): {e}")
        else:
            file_handler.setLevel(logging.DEBUG)  # Always log everything to file
            file_handler.setFormatter(logging.Formatter(
                fmt='%(asctime)s - %(levelname)s - [%(name)s:%(lineno)d] - %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
            file_handler._ghz_fidelity = True
            root_logger.addHandler(file_handler)

    return root_logger


def get_logger(name):
    """
    Get a logger instance for a specific module.

    Args:
        name: Module name (usually __name__)

    Returns:
        logging.Logger instance
    """
    return logging.getLogger(name)


# Initialize logging on import (can be reconfigured later)
debug_mode = os.getenv('GHZ_FIDELITY_DEBUG', '0') == '1'
default_level = logging.DEBUG if debug_mode else None

setup_logging(level=default_level)
