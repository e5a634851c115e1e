from tensors.exceptions import EC2TError


class TrainingDivergedError(EC2TError):
    """Raised when the training loss stops being finite."""


class StaleCacheError(EC2TError):
    """Raised when backward_ste gets a forward cache from an older model state."""


class DatasetError(EC2TError):
    """Raised for invalid dataset parameters."""


class TrainingConfigError(EC2TError):
    """Raised for an invalid TrainConfig."""
