# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT


from __future__ import annotations

from collections.abc import Sequence

import numpy as np


def all_or_none(*args, err_hint: str | None = None):
    nulls = [x is None for x in args]
    if all(nulls) or not any(nulls):
        return args

    err_hint = err_hint or "The variables"
    raise ValueError(f"{err_hint} must all be provided or all be `None`")


def per_agent(value: float | Sequence[float], n: int, field_name: str) -> np.ndarray:
    """Broadcast a scalar to `n` agents, or check that a sequence has one entry per
    agent.
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(
            f"`{field_name}` must be a scalar or have one entry per agent ({n}); "
            f"got shape {arr.shape}."
        )
    return arr.copy()


def fmt_float(value: float) -> str:
    """17 significant digits, enough for a lossless float round-trip."""
    return f"{value:.17g}"


def fmt_vector(vec: Sequence[float] | np.ndarray, digits: int = 6) -> str:
    return "[" + ", ".join(f"{v:.{digits}g}" for v in vec) + "]"
