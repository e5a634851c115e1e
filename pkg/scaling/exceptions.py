from tensors.exceptions import EC2TError


class InfeasibleScalingError(EC2TError):
    """Raised when no grid point satisfies a*b^2*c^2 ~= 2 within tolerance."""

    def __init__(self, message, best_residual):
        super().__init__(message)
        self.best_residual = best_residual
