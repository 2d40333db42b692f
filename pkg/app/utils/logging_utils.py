"""Logging utilities for the hypothesis test designer."""
import logging
import sys
from typing import Optional, Union

from app.config.constants import LOG_DIR, LOG_LEVEL


def setup_logger(name: str, log_file: Optional[str] = None,
                 level: Union[int, str, None] = None) -> logging.Logger:
    """Set up a logger with console (stderr) and optional file handlers."""
    logger = logging.getLogger(name)
    if level is None:
        level = LOG_LEVEL
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.WARNING
    logger.setLevel(level)

    # Prevent duplicate handlers
    if logger.handlers:
        return logger

    # stdout carries tables and CSV, so diagnostics go to stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_format = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    console_handler.setFormatter(console_format)
    logger.addHandler(console_handler)
    logger.propagate = False

    # File handler (always UTF-8)
    if log_file:
        LOG_DIR.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(LOG_DIR / log_file, encoding='utf-8')
        file_handler.setLevel(level)
        file_format = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s')
        file_handler.setFormatter(file_format)
        logger.addHandler(file_handler)

    return logger


def set_level(level: Union[int, str]) -> None:
    """Change the level of every logger created under the ``app`` namespace."""
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    for name, logger in logging.Logger.manager.loggerDict.items():
        if not isinstance(logger, logging.Logger):
            continue
        if name == "app" or name.startswith("app.") or name == "__main__":
            logger.setLevel(level)
            for handler in logger.handlers:
                handler.setLevel(level)
