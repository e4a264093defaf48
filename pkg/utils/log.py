from __future__ import annotations

import logging
import sys
from typing import Optional

from utils.config import log_level_from_env

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Install one stderr handler on the root logger; stdout stays reserved for reports."""
    name = (level or log_level_from_env()).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.WARNING
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_acidify", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._acidify = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(numeric)
