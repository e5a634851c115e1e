from tensors.exceptions import EC2TError


class CorruptLayerError(EC2TError):
    """Raised when a layer's masks disagree (popcount, lengths or padding bits)."""


class CorruptModelError(EC2TError):
    """Raised when a .ec2t model file fails to parse or its checksum does not match."""
