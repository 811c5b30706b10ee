"""Shared exception base so callers can catch any engine error in one place."""


class DatamillError(Exception):
    """Base class for every error raised by this package."""
