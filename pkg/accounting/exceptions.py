from tensors.exceptions import EC2TError


class InconsistentModelError(EC2TError):
    """Raised when a layer spec and its ternary masks disagree on dimensions or kind."""
