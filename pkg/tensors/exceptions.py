"""
Exception hierarchy shared by every app.
Management commands turn EC2TError into CommandError (exit status 1).
"""


class EC2TError(Exception):
    """Base class for all library errors."""


class DimensionError(EC2TError):
    """Raised when tensor shapes do not agree."""


class TensorFormatError(EC2TError):
    """Raised when an .ect-tensor file cannot be parsed."""
