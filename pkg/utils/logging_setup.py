"""
Logging configuration shared by the CLI and direct-run scripts.
"""
import logging
import sys
from typing import Optional

from config import Config

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Install one stderr handler at `level` (Config.LOG_LEVEL by default)."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel((level or Config.LOG_LEVEL).upper())
