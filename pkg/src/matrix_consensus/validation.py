# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT


import math
from typing import Any

from matrix_consensus.core.sim import SimMode


def _is_number(value: Any) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


def validate_positive_int(key: str, value: Any) -> tuple[bool, str | None]:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        return (False, f"{key} must be a positive integer.")
    return (True, None)


def validate_nonnegative_int(key: str, value: Any) -> tuple[bool, str | None]:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        return (False, f"{key} must be a nonnegative integer.")
    return (True, None)


def validate_positive_number(key: str, value: Any) -> tuple[bool, str | None]:
    if not _is_number(value) or value <= 0:
        return (False, f"{key} must be a positive, finite number.")
    return (True, None)


def validate_nonnegative_number(key: str, value: Any) -> tuple[bool, str | None]:
    if not _is_number(value) or value < 0:
        return (False, f"{key} must be a nonnegative, finite number.")
    return (True, None)


def validate_number_or_list(key: str, value: Any) -> tuple[bool, str | None]:
    if _is_number(value):
        return (True, None)
    if isinstance(value, list) and value and all(_is_number(v) for v in value):
        return (True, None)
    err_msg = f"{key} must be a number applicable to all agents, or a list with one number per agent."  # noqa: E501
    return (False, err_msg)


def validate_mode(key: str, value: Any) -> tuple[bool, str | None]:
    allowed_values = [str(m) for m in SimMode]
    if value not in allowed_values:
        err_msg = f"{key} can only be one of {allowed_values}."
        return (False, err_msg)
    return (True, None)


def validate_init_kind(key: str, value: Any) -> tuple[bool, str | None]:
    allowed_values = ["uniform", "explicit"]
    if value not in allowed_values:
        err_msg = f"{key} can only be one of {allowed_values}."
        return (False, err_msg)
    return (True, None)


def validate_number(key: str, value: Any) -> tuple[bool, str | None]:
    if not _is_number(value):
        return (False, f"{key} must be a finite number.")
    return (True, None)
