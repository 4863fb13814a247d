"""Loguru sink setup for the command-line entry points."""

import sys
from pathlib import Path

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def configure_logging(log_dir: str | Path | None = None, level: str = "INFO") -> None:
    """Replace loguru's default sink with a coloured stdout sink and, optionally, a daily file.

    Args:
        log_dir: directory for ``mumkit_{date}.log`` files; no file sink when None
        level: minimum level for both sinks
    """
    logger.remove()
    logger.add(sink=sys.stdout, format=CONSOLE_FORMAT, level=level, colorize=True)
    if log_dir is None:
        return
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    logger.add(
        sink=log_dir / "mumkit_{time:YYYY-MM-DD}.log",
        format=FILE_FORMAT,
        level=level,
        rotation="00:00",
        retention="30 days",
        compression="zip",
        encoding="utf-8",
    )
