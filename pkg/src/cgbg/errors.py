"""Exception types shared by every module."""


class CGBGError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(CGBGError, ValueError):
    """An argument has the wrong shape, range or type."""


class CapacityError(CGBGError, MemoryError):
    """A computation would exceed a configured size or memory cap."""
