from __future__ import annotations

import enum


class Group(enum.IntEnum):
    """Sensitive-attribute value. ``PLUS`` is the privileged group (male users)."""

    MINUS = 0
    PLUS = 1

    @property
    def label(self) -> str:
        return "s+" if self is Group.PLUS else "s-"

    @classmethod
    def parse(cls, value) -> "Group":
        if isinstance(value, Group):
            return value
        if isinstance(value, str):
            v = value.strip().lower()
            if v in ("s+", "plus", "1", "male"):
                return cls.PLUS
            if v in ("s-", "minus", "0", "female"):
                return cls.MINUS
            raise ValueError(f"unknown group label {value!r}")
        return cls(int(value))

    def other(self) -> "Group":
        return Group(1 - int(self))
