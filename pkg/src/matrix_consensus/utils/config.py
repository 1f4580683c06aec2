# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT


import dataclasses
from typing import Any, Callable, ClassVar


@dataclasses.dataclass
class ConfigOption:
    UNSET: ClassVar[object] = object()

    name: str
    default_value: Any
    description: str
    validator: Callable[[str, Any], tuple[bool, str | None]] | None = None

    # Documentation helper for defaults that don't render well as-is, eg. `inf`.
    default_value_label: str | None = None

    @property
    def required(self) -> bool:
        return self.default_value is ConfigOption.UNSET

    def resolve(self, section: dict[str, Any]) -> tuple[Any, str | None]:
        """Look up this option in a parsed section and validate it.

        Returns `(value, err_msg)`. A missing required option or a value rejected by
        the validator produces an error message instead of a fallback value.
        """
        if self.name not in section:
            if self.required:
                return (None, f"`{self.name}` is required.")
            return (self.default_value, None)

        value = section[self.name]
        if self.validator is not None:
            is_valid, err_msg = self.validator(self.name, value)
            if not is_valid:
                return (None, err_msg)
        return (value, None)

    def doc_default(self) -> str:
        if self.default_value_label is not None:
            return self.default_value_label
        if self.required:
            return "(required)"
        return repr(self.default_value)
