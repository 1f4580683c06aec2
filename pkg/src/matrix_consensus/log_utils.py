# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

import logging
import sys


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s:%(funcName)s():L%(lineno)d %(message)s"

logger = logging.getLogger("matrix_consensus")

_handler: logging.Handler | None = None


def init_log(level: int = logging.WARNING) -> logging.Logger:
    """Attach a single stderr handler to the package logger.

    Calling this again replaces the previous handler, so the CLI and tests can
    re-initialize freely without duplicated output.
    """
    global _handler  # noqa: PLW0603

    if _handler is not None:
        logger.removeHandler(_handler)

    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(_handler)
    logger.setLevel(level)
    return logger
