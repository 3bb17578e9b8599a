"""Project loggers: one coloured stdout handler per component, with optional run context in each line.

Example:
    from src.utils.custom_logger import get_logger, with_context
    logger = get_logger("Scan")
    logger.info("Scanning 120 traits")
    with_context(logger, trait="Hdc", chr="2").warning("empty genotype class at the peak")
"""

import logging
import sys
from typing import Any, Optional

from colorama import Fore, Style

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(context)s%(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
LEVEL_COLORS = {
    "DEBUG": Fore.BLUE,
    "INFO": Fore.GREEN,
    "WARNING": Fore.YELLOW,
    "ERROR": Fore.RED,
    "CRITICAL": Fore.MAGENTA,
}

_LOGGER_NAMES: set[str] = set()
_LEVEL = logging.INFO


class ColorFormatter(logging.Formatter):
    """Coloured level names; records logged without context get an empty prefix."""

    def __init__(self, use_colors: bool = True):
        super().__init__(LOG_FORMAT, DATE_FORMAT)
        self.use_colors = use_colors

    def format(self, record: logging.LogRecord) -> str:
        record = logging.makeLogRecord(record.__dict__)
        if not hasattr(record, "context"):
            record.context = ""
        if self.use_colors:
            record.levelname = f"{LEVEL_COLORS.get(record.levelname, '')}{record.levelname}{Style.RESET_ALL}"
        return super().format(record)


class ContextAdapter(logging.LoggerAdapter):
    """Prefixes every message with key=value pairs (trait, chr, scenario...); None values are left out."""

    def process(self, msg: Any, kwargs: dict) -> tuple[Any, dict]:
        pairs = " ".join(f"{key}={value}" for key, value in self.extra.items() if value is not None)
        kwargs.setdefault("extra", {})["context"] = f"[{pairs}] " if pairs else ""
        return msg, kwargs


def get_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    """Return the project logger for a component name."""
    logger = logging.getLogger(name)
    logger.setLevel(_LEVEL if level is None else level)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(ColorFormatter(use_colors=sys.stdout.isatty()))
        logger.addHandler(handler)
    logger.propagate = False
    _LOGGER_NAMES.add(name)
    return logger


def with_context(logger: logging.Logger, **fields: Any) -> ContextAdapter:
    return ContextAdapter(logger, fields)


def set_log_level(level: int) -> None:
    """Change the level of every logger handed out by get_logger."""
    global _LEVEL  # pylint: disable=global-statement
    _LEVEL = level
    for name in _LOGGER_NAMES:
        logging.getLogger(name).setLevel(level)
