"""
Structured error kinds raised across msrfnet, plus the CLI wrapper that turns
them into a one-line message and a nonzero exit code.
"""

import functools
import sys

import click


class MsrfError(ValueError):
    """Base class for every error msrfnet raises on purpose."""

    @property
    def kind(self):
        return type(self).__name__


class ShapeError(MsrfError):
    def __init__(self, op, dim, expected, got):
        self.op = op
        self.dim = dim
        self.expected = expected
        self.got = got
        super().__init__(f"{op}: dimension '{dim}' expected {expected}, got {got}")


class ConfigError(MsrfError):
    pass


class UsageError(MsrfError):
    pass


class DataIOError(MsrfError):
    pass


class CheckpointError(MsrfError):
    pass


class StatsError(MsrfError):
    pass


def exit_on_error(func):
    """Report an MsrfError as `❌ <Kind>: <message>` on stderr and exit 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except MsrfError as e:
            message = " ".join(str(e).split())
            click.secho(f"❌ {e.kind}: {message}", fg="red", err=True)
            sys.exit(1)

    return wrapper
