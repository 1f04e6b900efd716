from __future__ import annotations

import logging
import traceback
from typing import NoReturn

from fbs_herald.exceptions import FBSError, ValidationError

LOGGER_NAME = "fbs_herald"


def get_logger(name: str | None = None) -> logging.Logger:
    if not name:
        return logging.getLogger(LOGGER_NAME)
    if not name.startswith(LOGGER_NAME):
        name = f"{LOGGER_NAME}.{name}"
    return logging.getLogger(name)


def throw(message: str, exc: type[FBSError] = ValidationError) -> NoReturn:
    raise exc(message)


def log_error(message: str | None = None, title: str | None = None) -> None:
    """Log the active traceback (or `message`) under `title` at ERROR level."""
    body = message or traceback.format_exc()
    get_logger().error("%s\n%s", title or "fbs_herald error", body)


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
