from tensors.exceptions import EC2TError


class DegenerateInitError(EC2TError):
    """Raised when centroids cannot be initialized from an all-zero tensor."""


class QuantizationError(EC2TError):
    """Raised for invalid quantization arguments (mode, threshold, lambda)."""
