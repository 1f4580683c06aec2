# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

import psutil

from matrix_consensus.log_utils import logger


def default_worker_count() -> int:
    """Number of physical cores, which is what a batch of CPU-bound simulation runs can
    actually use. Falls back to the logical count, and then to 1.
    """
    count = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True)
    if not count:
        logger.warning("Could not determine the CPU count; using a single worker.")
        return 1
    return count


def cpu_seconds(process: psutil.Process | None = None) -> float:
    """User + system CPU time consumed so far by `process` (default: this process)."""
    times = (process or psutil.Process()).cpu_times()
    return times.user + times.system
