"""Exception types. Each carries the CLI exit code it maps to."""
from __future__ import annotations


class EventcastError(Exception):
    exit_code = 4


class ConfigError(EventcastError):
    """Invalid configuration, pattern or model file."""

    exit_code = 2


class PatternSyntaxError(ConfigError):
    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at position {position}: {message}")
        self.position = position


class UnknownPredicateError(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"unknown predicate {name!r}")
        self.name = name


class EventError(EventcastError):
    """An event cannot be evaluated (missing attribute, wrong type, exclusion violated)."""

    exit_code = 1

    def __init__(self, message: str, attribute: str | None = None):
        super().__init__(message)
        self.attribute = attribute


class BudgetError(EventcastError):
    """A construction exceeded its configured state budget."""

    exit_code = 3

    def __init__(self, what: str, limit: int):
        super().__init__(f"{what} exceeded the state budget of {limit}")
        self.limit = limit


class InvariantError(EventcastError):
    exit_code = 4
