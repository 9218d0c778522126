"""Exception types raised by the numerical pipelines."""


class CavityBECError(Exception):
    """Base class for all numerical failures in this package."""


class ConvergenceError(CavityBECError):
    """A self-consistent solver did not converge.

    Attributes
    ----------
    residual : float
        Last residual reached before giving up (``nan`` if unknown).
    delta_c : float or None
        Pump-cavity detuning of the failing solve, when known.
    """

    def __init__(self, message, residual=float("nan"), delta_c=None):
        if delta_c is not None:
            message = f"{message} (delta_c={delta_c!r})"
        super().__init__(message)
        self.residual = residual
        self.delta_c = delta_c


class DefectiveSpectrumError(CavityBECError):
    """The fluctuation matrix has no complete biorthogonal eigenbasis.

    Attributes
    ----------
    cluster : list of int
        Indices of the eigenvalues forming the offending cluster.
    """

    def __init__(self, message, cluster=()):
        super().__init__(message)
        self.cluster = list(cluster)


class NoSteadyStateError(CavityBECError):
    """Correlations were requested for a dynamically unstable state."""


class InvalidCovarianceError(CavityBECError):
    """A covariance matrix violates a consistency requirement."""
